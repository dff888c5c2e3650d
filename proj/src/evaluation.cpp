#include "sketchloom/evaluation.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sketchloom/errors.hpp"
#include "sketchloom/nn/checkpoint.hpp"
#include "sketchloom/nn/network.hpp"
#include "sketchloom/rng.hpp"

namespace sketchloom::evaluation {

namespace {

void he_init(nn::Conv2d<float>& c, int in_ch, int out_ch, RngStream& rng) {
    c.init(in_ch, out_ch, 4, 2, 1, rng);
    const double scale = std::sqrt(2.0 / double(in_ch * 16));
    RngStream wr(rng.next_u64());
    for (auto& w : c.w) w = float(wr.normal() * scale);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_svg(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

FeatureExtractor FeatureExtractor::seeded(uint64_t seed, int d) {
    require(d >= 1, "feature dimension must be >= 1");
    FeatureExtractor fx;
    fx.d_ = d;
    RngStream r1 = derive_stream(seed, stream_tag("fx"), 1);
    RngStream r2 = derive_stream(seed, stream_tag("fx"), 2);
    RngStream r3 = derive_stream(seed, stream_tag("fx"), 3);
    he_init(fx.c1_, 3, 16, r1);
    he_init(fx.c2_, 16, 32, r2);
    he_init(fx.c3_, 32, d, r3);
    return fx;
}

void FeatureExtractor::save(const std::filesystem::path& path) const {
    nn::TensorFile tf;
    tf.metadata["kind"] = "feature_extractor";
    tf.metadata["feature_dim"] = d_;
    auto put = [&](const std::string& name, const std::vector<float>& v) {
        tf.tensors.push_back({name, {int(v.size())}, v});
    };
    put("c1.w", c1_.w);
    put("c1.b", c1_.b);
    put("c2.w", c2_.w);
    put("c2.b", c2_.b);
    put("c3.w", c3_.w);
    put("c3.b", c3_.b);
    nn::save_tensor_file(path, tf);
}

FeatureExtractor FeatureExtractor::from_file(const std::filesystem::path& path) {
    nn::TensorFile tf = nn::load_tensor_file(path);
    if (!tf.metadata.contains("feature_dim") || !tf.metadata["feature_dim"].is_number_integer())
        throw FormatError("feature extractor file lacks a feature_dim field: " + path.string());
    const int d = tf.metadata["feature_dim"].get<int>();
    FeatureExtractor fx;
    fx.d_ = d;
    RngStream dummy(0);
    fx.c1_.init(3, 16, 4, 2, 1, dummy);
    fx.c2_.init(16, 32, 4, 2, 1, dummy);
    fx.c3_.init(32, d, 4, 2, 1, dummy);
    auto grab = [&](const std::string& name, std::vector<float>& dst) {
        const nn::NamedTensor& t = tf.need(name);
        if (t.data.size() != dst.size())
            throw FormatError("tensor " + name + " in " + path.string() + " has wrong size");
        dst = t.data;
    };
    grab("c1.w", fx.c1_.w);
    grab("c1.b", fx.c1_.b);
    grab("c2.w", fx.c2_.w);
    grab("c2.b", fx.c2_.b);
    grab("c3.w", fx.c3_.w);
    grab("c3.b", fx.c3_.b);
    return fx;
}

Eigen::MatrixXd FeatureExtractor::extract(const std::vector<const ImageTensor*>& images) const {
    require(!images.empty(), "feature extraction needs at least one image");
    const int h = images[0]->height, w = images[0]->width;
    require(std::min(h, w) >= 8, "images must be at least 8x8 for feature extraction");
    for (const ImageTensor* im : images)
        require(im->height == h && im->width == w, "all images must share dimensions");

    Eigen::MatrixXd out(long(images.size()), d_);
    nn::LeakyReLU<float> act1, act2;
    for (size_t i = 0; i < images.size(); ++i) {
        const ImageTensor& im = *images[i];
        nn::Tensor4<float> x(1, 3, h, w);
        for (int c = 0; c < 3; ++c) {
            const int src_c = im.channels == 3 ? c : 0;
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    x.at(0, c, y, xx) = im.at(y, xx, src_c) * 2.0f - 1.0f;
        }
        nn::Tensor4<float> t = c1_.forward(x, false);
        t = act1.forward(t);
        t = c2_.forward(t, false);
        t = act2.forward(t);
        t = c3_.forward(t, false);
        const long hw = long(t.h) * t.w;
        for (int c = 0; c < d_; ++c) {
            double acc = 0.0;
            const float* p = &t.at(0, c, 0, 0);
            for (long k = 0; k < hw; ++k) acc += p[k];
            out(long(i), c) = acc / double(hw);
        }
    }
    return out;
}

FeatureStats gaussian_stats(const Eigen::MatrixXd& features) {
    const long n = features.rows();
    const int d = int(features.cols());
    require(n >= 2, "gaussian_stats needs at least 2 samples");
    FeatureStats st;
    st.d = d;
    st.n = n;
    st.mean = features.colwise().mean();
    Eigen::MatrixXd centered = features.rowwise() - st.mean.transpose();
    st.cov = (centered.transpose() * centered) / double(n - 1);
    st.cov = 0.5 * (st.cov + st.cov.transpose());  // scrub accumulation-order asymmetry
    st.cov += 1e-6 * Eigen::MatrixXd::Identity(d, d);
    return st;
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
    require(m.rows() == m.cols(), "sqrtm_psd needs a square matrix");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    require(asym <= 1e-8, "sqrtm_psd input is not symmetric");
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

FidValue fid(const FeatureStats& a, const FeatureStats& b) {
    require(a.d == b.d, "fid: feature dimensions differ");
    const Eigen::MatrixXd ra = sqrtm_psd(a.cov);
    Eigen::MatrixXd inner = ra * b.cov * ra;
    inner = 0.5 * (inner + inner.transpose());
    const Eigen::MatrixXd cross = sqrtm_psd(inner);
    const double mu = (a.mean - b.mean).squaredNorm();
    FidValue r;
    r.raw = mu + a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
    r.value = std::max(r.raw, 0.0);
    return r;
}

double student_t_quantile(double p, int dof) {
    require(dof >= 1, "student_t_quantile needs dof >= 1");
    require(p > 0.0 && p < 1.0, "student_t_quantile needs p in (0,1)");
    boost::math::students_t_distribution<double> dist{double(dof)};
    return boost::math::quantile(dist, p);
}

AggregatedSeries aggregate_runs(const std::vector<RunSeries>& runs, double confidence) {
    require(runs.size() >= 2, "aggregation needs at least 2 runs");
    require(confidence > 0.0 && confidence < 1.0, "confidence must be in (0,1)");
    const size_t n_stages = runs[0].points.size();
    require(n_stages >= 1, "aggregation needs at least one stage");
    for (const RunSeries& r : runs) {
        require(r.points.size() == n_stages, "runs disagree on stage list length");
        for (size_t s = 0; s < n_stages; ++s)
            require(r.points[s].first == runs[0].points[s].first, "runs disagree on stage values");
    }

    AggregatedSeries agg;
    agg.confidence = confidence;
    agg.n_runs = int(runs.size());
    const int n = agg.n_runs;
    const double tq = student_t_quantile((1.0 + confidence) / 2.0, n - 1);
    for (size_t s = 0; s < n_stages; ++s) {
        agg.stages.push_back(runs[0].points[s].first);
        double mean = 0.0;
        for (const RunSeries& r : runs) mean += r.points[s].second;
        mean /= double(n);
        double ss = 0.0;
        for (const RunSeries& r : runs) {
            const double d = r.points[s].second - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / double(n - 1));
        agg.mean_fid.push_back(mean);
        agg.ci_half_width.push_back(tq * sd / std::sqrt(double(n)));
    }
    return agg;
}

void emit_series_csv(const std::vector<AggregatedSeries>& series,
                     const std::filesystem::path& csv_path) {
    require(!series.empty(), "no series to emit");
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + csv_path.string());
    out << "stage,mean_fid,ci_lo,ci_hi,variant\n";
    for (const AggregatedSeries& agg : series)
        for (size_t s = 0; s < agg.stages.size(); ++s)
            out << agg.stages[s] << ',' << fmt(agg.mean_fid[s]) << ','
                << fmt(agg.mean_fid[s] - agg.ci_half_width[s]) << ','
                << fmt(agg.mean_fid[s] + agg.ci_half_width[s]) << ',' << agg.variant << '\n';
    if (!out.flush()) throw FormatError("write failed: " + csv_path.string());
}

void emit_series_svg(const std::vector<AggregatedSeries>& series,
                     const std::filesystem::path& svg_path) {
    require(!series.empty(), "no series to emit");
    static const char* kPalette[] = {"#1b6ca8", "#d1495b", "#2e933c",
                                     "#8338ec", "#e09f3e", "#3d5a80"};
    const double width = 800, height = 480;
    const double ml = 70, mr = 170, mt = 30, mb = 55;
    const double pw = width - ml - mr, ph = height - mt - mb;

    long s_lo = series[0].stages.front(), s_hi = series[0].stages.back();
    double f_lo = 0.0, f_hi = 0.0;
    for (const AggregatedSeries& agg : series) {
        s_lo = std::min(s_lo, agg.stages.front());
        s_hi = std::max(s_hi, agg.stages.back());
        for (size_t i = 0; i < agg.stages.size(); ++i)
            f_hi = std::max(f_hi, agg.mean_fid[i] + agg.ci_half_width[i]);
    }
    if (s_hi == s_lo) s_hi = s_lo + 1;
    if (f_hi <= f_lo) f_hi = f_lo + 1.0;
    f_hi *= 1.05;

    auto px = [&](double stage) { return ml + pw * (stage - double(s_lo)) / double(s_hi - s_lo); };
    auto py = [&](double f) { return mt + ph * (1.0 - (f - f_lo) / (f_hi - f_lo)); };

    std::ofstream out(svg_path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + svg_path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << ' ' << height
        << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    // axes with a handful of ticks
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"#444\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double stage = s_lo + (s_hi - s_lo) * i / 4.0;
        const double fv = f_lo + (f_hi - f_lo) * i / 4.0;
        out << "<text x=\"" << px(stage) << "\" y=\"" << mt + ph + 18
            << "\" text-anchor=\"middle\">" << fmt_svg(stage) << "</text>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << py(fv) + 4
            << "\" text-anchor=\"end\">" << fmt_svg(fv) << "</text>\n";
        out << "<line x1=\"" << ml << "\" y1=\"" << py(fv) << "\" x2=\"" << ml + pw << "\" y2=\""
            << py(fv) << "\" stroke=\"#ddd\" stroke-dasharray=\"3,4\"/>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\">training stage (G steps)</text>\n";
    out << "<text x=\"18\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << mt + ph / 2 << ")\">FID</text>\n";

    for (size_t v = 0; v < series.size(); ++v) {
        const AggregatedSeries& agg = series[v];
        const char* color = kPalette[v % 6];

        // confidence band: upper edge forward, lower edge back
        out << "<path class=\"ci-band\" fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" d=\"";
        for (size_t i = 0; i < agg.stages.size(); ++i)
            out << (i == 0 ? 'M' : 'L') << fmt_svg(px(double(agg.stages[i]))) << ' '
                << fmt_svg(py(agg.mean_fid[i] + agg.ci_half_width[i])) << ' ';
        for (size_t i = agg.stages.size(); i-- > 0;)
            out << 'L' << fmt_svg(px(double(agg.stages[i]))) << ' '
                << fmt_svg(py(std::max(f_lo, agg.mean_fid[i] - agg.ci_half_width[i]))) << ' ';
        out << "Z\"/>\n";

        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < agg.stages.size(); ++i)
            out << fmt_svg(px(double(agg.stages[i]))) << ',' << fmt_svg(py(agg.mean_fid[i])) << ' ';
        out << "\"/>\n";

        const double ly = mt + 16 + 22 * double(v);
        out << "<rect x=\"" << ml + pw + 14 << "\" y=\"" << ly - 10
            << "\" width=\"14\" height=\"14\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << ml + pw + 34 << "\" y=\"" << ly + 2 << "\">" << agg.variant
            << "</text>\n";
    }
    out << "</svg>\n";
    if (!out.flush()) throw FormatError("write failed: " + svg_path.string());
}

void emit_series(const std::vector<AggregatedSeries>& series,
                 const std::filesystem::path& csv_path, const std::filesystem::path& svg_path) {
    emit_series_csv(series, csv_path);
    emit_series_svg(series, svg_path);
}

}  // namespace sketchloom::evaluation

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sketchloom/evaluation.hpp"
#include "sketchloom/rng.hpp"

using namespace sketchloom;
using namespace sketchloom::evaluation;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / ("sketchloom_" + name);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// ---- independent oracles ---------------------------------------------------

// Cyclic Jacobi eigendecomposition for small symmetric matrices; keeps the
// FID oracle free of the Eigen solver the pipeline uses.
struct SymEig {
    std::vector<double> values;            // eigenvalues
    std::vector<std::vector<double>> vecs;  // vecs[k] = k-th eigenvector
};

SymEig jacobi_eig(std::vector<std::vector<double>> a) {
    const int n = int(a.size());
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) v[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-26) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double phi = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
                const double c = std::cos(phi), s = std::sin(phi);
                for (int k = 0; k < n; ++k) {  // A <- J^T A (rows p,q)
                    const double akp = a[p][k], akq = a[q][k];
                    a[p][k] = c * akp - s * akq;
                    a[q][k] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {  // A <- A J (cols p,q)
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {  // V <- V J
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
    }
    SymEig r;
    r.values.resize(n);
    r.vecs.assign(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
        r.values[i] = a[i][i];
        for (int k = 0; k < n; ++k) r.vecs[i][k] = v[k][i];
    }
    return r;
}

std::vector<std::vector<double>> matmul(const std::vector<std::vector<double>>& a,
                                        const std::vector<std::vector<double>>& b) {
    const int n = int(a.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

std::vector<std::vector<double>> sqrtm_oracle(const std::vector<std::vector<double>>& m) {
    const int n = int(m.size());
    SymEig e = jacobi_eig(m);
    std::vector<std::vector<double>> r(n, std::vector<double>(n, 0.0));
    for (int k = 0; k < n; ++k) {
        const double lam = std::sqrt(std::max(0.0, e.values[k]));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) r[i][j] += lam * e.vecs[k][i] * e.vecs[k][j];
    }
    return r;
}

double fid_oracle(const FeatureStats& a, const FeatureStats& b) {
    const int d = a.d;
    auto to_vec = [&](const Eigen::MatrixXd& m) {
        std::vector<std::vector<double>> out(d, std::vector<double>(d));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) out[i][j] = m(i, j);
        return out;
    };
    const auto ra = sqrtm_oracle(to_vec(a.cov));
    const auto inner = matmul(matmul(ra, to_vec(b.cov)), ra);
    const auto cross = sqrtm_oracle(inner);
    double tr = 0.0;
    for (int i = 0; i < d; ++i) tr += a.cov(i, i) + b.cov(i, i) - 2.0 * cross[i][i];
    return (a.mean - b.mean).squaredNorm() + tr;
}

// Student-t quantile by Simpson quadrature of the density plus bisection;
// uses nothing but lgamma.
double t_pdf(double x, int nu) {
    const double lc = std::lgamma((nu + 1) / 2.0) - std::lgamma(nu / 2.0) -
                      0.5 * std::log(nu * M_PI);
    return std::exp(lc - (nu + 1) / 2.0 * std::log1p(x * x / nu));
}

double t_cdf(double x, int nu) {  // x >= 0
    const int n = 20000;
    const double h = x / n;
    double s = t_pdf(0, nu) + t_pdf(x, nu);
    for (int i = 1; i < n; ++i) s += t_pdf(i * h, nu) * (i % 2 ? 4.0 : 2.0);
    return 0.5 + s * h / 3.0;
}

double t_quantile_oracle(double p, int nu) {  // p in (0.5, 1)
    double lo = 0.0, hi = 200.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (t_cdf(mid, nu) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

FeatureStats stats_1d(double mu, double var) {
    FeatureStats s;
    s.d = 1;
    s.n = 10;
    s.mean = Eigen::VectorXd::Constant(1, mu);
    s.cov = Eigen::MatrixXd::Constant(1, 1, var);
    return s;
}

FeatureStats random_stats(int d, uint64_t seed) {
    RngStream rng(seed);
    Eigen::MatrixXd x(40, d);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = rng.normal() + 0.3 * j;
    return gaussian_stats(x);
}

ImageTensor random_image(int side, int ch, uint64_t seed) {
    ImageTensor im = ImageTensor::make(side, side, ch);
    RngStream rng(seed);
    for (float& v : im.data) v = float(rng.next_double());
    return im;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

size_t count_substr(const std::string& hay, const std::string& needle) {
    size_t n = 0;
    for (size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + 1))
        ++n;
    return n;
}

}  // namespace

TEST_CASE("gaussian_stats matches the hand cases") {
    Eigen::MatrixXd x(2, 1);
    x << 0.0, 2.0;
    FeatureStats s = gaussian_stats(x);
    CHECK(s.mean(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.cov(0, 0) == doctest::Approx(2.0 + 1e-6).epsilon(1e-12));
    CHECK(s.n == 2);

    Eigen::MatrixXd same(5, 3);
    for (int i = 0; i < 5; ++i) same.row(i) << 1.0, 2.0, 3.0;
    FeatureStats s2 = gaussian_stats(same);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(s2.cov(i, j) == doctest::Approx(i == j ? 1e-6 : 0.0).epsilon(1e-15));

    Eigen::MatrixXd one(1, 2);
    one << 0.0, 0.0;
    CHECK_THROWS_AS(gaussian_stats(one), ArgumentError);

    SUBCASE("covariance is symmetric to machine precision") {
        FeatureStats s3 = random_stats(6, 77);
        CHECK((s3.cov - s3.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("sqrtm_psd squares back to its input") {
    CHECK(sqrtm_psd(Eigen::MatrixXd::Identity(3, 3)).isApprox(Eigen::MatrixXd::Identity(3, 3)));

    Eigen::MatrixXd d2 = Eigen::Vector2d(4.0, 9.0).asDiagonal();
    Eigen::MatrixXd r2 = sqrtm_psd(d2);
    CHECK(r2(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r2(1, 1) == doctest::Approx(3.0).epsilon(1e-12));

    RngStream rng(9);
    for (int d : {2, 5, 8}) {
        Eigen::MatrixXd b(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) b(i, j) = rng.normal();
        Eigen::MatrixXd m = b.transpose() * b + 0.1 * Eigen::MatrixXd::Identity(d, d);
        m = 0.5 * (m + m.transpose());
        Eigen::MatrixXd r = sqrtm_psd(m);
        CHECK(((r * r) - m).cwiseAbs().maxCoeff() <= 1e-8);
    }

    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.0, 1.0;
    CHECK_THROWS_AS(sqrtm_psd(asym), ArgumentError);
}

TEST_CASE("fid reproduces the univariate closed forms") {
    CHECK(fid(stats_1d(0, 1), stats_1d(1, 1)).value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fid(stats_1d(0, 4), stats_1d(0, 1)).value == doctest::Approx(1.0).epsilon(1e-9));
    // general 1-D: (mu_a-mu_b)^2 + (sd_a-sd_b)^2
    CHECK(fid(stats_1d(0.5, 2.25), stats_1d(-1, 0.25)).value ==
          doctest::Approx(2.25 + 1.0).epsilon(1e-9));
}

TEST_CASE("fid agrees with the dense Jacobi oracle and is symmetric") {
    for (int d : {1, 2, 4}) {
        for (uint64_t seed : {1u, 2u, 3u}) {
            FeatureStats a = random_stats(d, 100 * d + seed);
            FeatureStats b = random_stats(d, 200 * d + seed);
            const FidValue v = fid(a, b);
            CHECK(std::abs(v.value - fid_oracle(a, b)) <= 1e-6);
            CHECK(std::abs(v.value - fid(b, a).value) <= 1e-9);
            CHECK(v.value >= 0.0);
        }
    }
    FeatureStats a = random_stats(4, 42);
    CHECK(fid(a, a).value <= 1e-8);
    CHECK_THROWS_AS(fid(random_stats(2, 1), random_stats(3, 1)), ArgumentError);
}

TEST_CASE("fid is invariant under a common feature-space rotation") {
    const int d = 5;
    RngStream rng(31);
    Eigen::MatrixXd xa(30, d), xb(30, d), g(d, d);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < d; ++j) {
            xa(i, j) = rng.normal() * (1.0 + 0.2 * j);
            xb(i, j) = rng.normal() + 0.5;
        }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();

    const double before = fid(gaussian_stats(xa), gaussian_stats(xb)).value;
    const double after = fid(gaussian_stats(xa * q), gaussian_stats(xb * q)).value;
    CHECK(std::abs(before - after) <= 1e-6);
}

TEST_CASE("student t quantile matches the quadrature oracle and the table") {
    CHECK(std::abs(student_t_quantile(0.995, 9) - 3.2498) <= 1e-3);
    for (int nu : {1, 3, 9, 25}) {
        for (double p : {0.9, 0.975, 0.995}) {
            CHECK(std::abs(student_t_quantile(p, nu) - t_quantile_oracle(p, nu)) <= 1e-5);
        }
    }
    CHECK(std::abs(student_t_quantile(0.975, 1) - 12.706) <= 1e-3);
    CHECK_THROWS_AS(student_t_quantile(0.5, 0), ArgumentError);
    CHECK_THROWS_AS(student_t_quantile(1.0, 5), ArgumentError);
}

TEST_CASE("feature extractor is deterministic, shaped and sensitive") {
    std::vector<ImageTensor> imgs;
    for (int i = 0; i < 4; ++i) imgs.push_back(random_image(16, 3, 50 + i));
    std::vector<const ImageTensor*> ptrs;
    for (const ImageTensor& im : imgs) ptrs.push_back(&im);

    FeatureExtractor fx = FeatureExtractor::seeded(7, 8);
    Eigen::MatrixXd f1 = fx.extract(ptrs);
    CHECK(f1.rows() == 4);
    CHECK(f1.cols() == 8);
    Eigen::MatrixXd f2 = FeatureExtractor::seeded(7, 8).extract(ptrs);
    CHECK((f1 - f2).cwiseAbs().maxCoeff() == 0.0);
    Eigen::MatrixXd f3 = FeatureExtractor::seeded(8, 8).extract(ptrs);
    CHECK((f1 - f3).cwiseAbs().maxCoeff() > 0.0);

    SUBCASE("one-pixel change moves the features") {
        ImageTensor tweaked = imgs[0];
        tweaked.data[5] = tweaked.data[5] < 0.5f ? 1.0f : 0.0f;
        Eigen::MatrixXd ft = fx.extract({&tweaked});
        CHECK((ft.row(0) - f1.row(0)).cwiseAbs().maxCoeff() > 0.0);
    }
    SUBCASE("grayscale images are accepted via channel replication") {
        ImageTensor gray = random_image(16, 1, 99);
        Eigen::MatrixXd fg = fx.extract({&gray});
        CHECK(fg.rows() == 1);
        CHECK(fg.allFinite());
    }
    SUBCASE("mixed dimensions are rejected") {
        ImageTensor big = random_image(32, 3, 1);
        CHECK_THROWS_AS(fx.extract({&imgs[0], &big}), ArgumentError);
        ImageTensor tiny = random_image(4, 3, 1);
        CHECK_THROWS_AS(fx.extract({&tiny}), ArgumentError);
    }
    SUBCASE("weights round-trip through a file") {
        TempDir dir("fx_roundtrip");
        fx.save(dir.path / "fx.sklm");
        FeatureExtractor loaded = FeatureExtractor::from_file(dir.path / "fx.sklm");
        CHECK(loaded.dim() == 8);
        Eigen::MatrixXd fl = loaded.extract(ptrs);
        CHECK((f1 - fl).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("aggregate_runs computes t confidence intervals") {
    auto series_with = [](uint64_t seed, std::vector<double> fids) {
        RunSeries r;
        r.run_seed = seed;
        for (size_t i = 0; i < fids.size(); ++i) r.points.push_back({long(i) * 100, fids[i]});
        return r;
    };

    SUBCASE("identical runs have zero half-width and exact mean") {
        std::vector<RunSeries> runs(10, series_with(1, {3.0, 2.0, 1.5}));
        AggregatedSeries agg = aggregate_runs(runs, 0.99);
        REQUIRE(agg.stages == std::vector<long>{0, 100, 200});
        CHECK(agg.mean_fid[0] == 3.0);
        CHECK(agg.mean_fid[2] == 1.5);
        for (double hw : agg.ci_half_width) CHECK(hw == 0.0);
        CHECK(agg.n_runs == 10);
    }
    SUBCASE("mean is the arithmetic mean; half-width follows the t formula") {
        std::vector<RunSeries> runs;
        const std::vector<double> vals = {4.0, 5.0, 7.0, 8.0};
        for (size_t i = 0; i < vals.size(); ++i)
            runs.push_back(series_with(i, {vals[i]}));
        AggregatedSeries agg = aggregate_runs(runs, 0.99);
        CHECK(agg.mean_fid[0] == doctest::Approx(6.0).epsilon(1e-15));
        // s = sqrt((4+1+1+4)/3), hw = t_{0.995,3} * s / 2
        const double s = std::sqrt(10.0 / 3.0);
        const double want = student_t_quantile(0.995, 3) * s / 2.0;
        CHECK(agg.ci_half_width[0] == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("duplicating every run k times shrinks the half-width as derived") {
        std::vector<RunSeries> base;
        const std::vector<double> vals = {4.0, 5.0, 7.0, 8.0, 2.5};
        for (size_t i = 0; i < vals.size(); ++i) base.push_back(series_with(i, {vals[i]}));
        std::vector<RunSeries> doubled = base;
        doubled.insert(doubled.end(), base.begin(), base.end());
        const double hw1 = aggregate_runs(base, 0.99).ci_half_width[0];
        const double hw2 = aggregate_runs(doubled, 0.99).ci_half_width[0];
        const int n = int(vals.size());
        // duplicated sample variance: s2' = 2(n-1)/(2n-1) * s2
        const double want = hw1 * (student_t_quantile(0.995, 2 * n - 1) /
                                   student_t_quantile(0.995, n - 1)) *
                            std::sqrt(2.0 * (n - 1) / double(2 * n - 1)) / std::sqrt(2.0);
        CHECK(hw2 == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("error cases") {
        std::vector<RunSeries> one = {series_with(1, {1.0})};
        CHECK_THROWS_AS(aggregate_runs(one, 0.99), ArgumentError);
        std::vector<RunSeries> mismatched = {series_with(1, {1.0, 2.0}),
                                             series_with(2, {1.0})};
        CHECK_THROWS_AS(aggregate_runs(mismatched, 0.99), ArgumentError);
        RunSeries shifted = series_with(3, {1.0, 2.0});
        shifted.points[1].first = 999;
        std::vector<RunSeries> misaligned = {series_with(1, {1.0, 2.0}), shifted};
        CHECK_THROWS_AS(aggregate_runs(misaligned, 0.99), ArgumentError);
    }
}

TEST_CASE("emit_series writes the documented CSV schema and SVG structure") {
    TempDir dir("emit_series");
    AggregatedSeries a;
    a.variant = "batch_1";
    a.stages = {0, 500, 1000};
    a.mean_fid = {5.0, 3.0, 2.0};
    a.ci_half_width = {0.5, 0.25, 0.2};
    a.n_runs = 10;
    AggregatedSeries b = a;
    b.variant = "batch_5";
    b.mean_fid = {5.5, 4.5, 4.0};

    emit_series({a, b}, dir.path / "curves.csv", dir.path / "curves.svg");

    const std::string csv = slurp(dir.path / "curves.csv");
    CHECK(csv.rfind("stage,mean_fid,ci_lo,ci_hi,variant\n", 0) == 0);
    CHECK(count_substr(csv, "\n") == 7);  // header + 2 variants x 3 stages
    CHECK(csv.find("0,5,4.5,5.5,batch_1") != std::string::npos);
    CHECK(csv.find("batch_5") != std::string::npos);

    const std::string svg = slurp(dir.path / "curves.svg");
    CHECK(count_substr(svg, "<polyline") == 2);
    CHECK(count_substr(svg, "class=\"ci-band\"") == 2);
    CHECK(svg.find("training stage (G steps)") != std::string::npos);
    CHECK(svg.find(">FID<") != std::string::npos);
    CHECK(svg.find(">batch_1<") != std::string::npos);
    CHECK(svg.find(">batch_5<") != std::string::npos);

    SUBCASE("single-variant emission") {
        emit_series({a}, dir.path / "one.csv", dir.path / "one.svg");
        const std::string one = slurp(dir.path / "one.csv");
        CHECK(count_substr(one, "\n") == 4);
        CHECK(count_substr(slurp(dir.path / "one.svg"), "<polyline") == 1);
    }
}

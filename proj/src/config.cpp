#include "sketchloom/config.hpp"

#include "sketchloom/errors.hpp"

namespace sketchloom {

using nlohmann::json;

json default_config_json() {
    return json{
        {"dataset",
         {{"manifest", ""},
          {"split_ratio", 0.8},
          {"near_dup_threshold", 5},
          {"sketch",
           {{"blur_sigma", 10.0}, {"blur_radius", 21}, {"dodge_epsilon", 1e-6}}}}},
        {"augment",
         {{"resize_to", 72},
          {"crop_to", 64},
          {"flip_probability", 0.5},
          {"max_rotation_deg", 15.0},
          {"salt_pepper_fraction", 0.02}}},
        {"model",
         {{"generator",
           {{"kind", "unet_generator"},
            {"in_channels", 1},
            {"out_channels", 3},
            {"base_width", 32},
            {"depth", 6},
            {"dropout_p", 0.5}}},
          {"discriminator",
           {{"kind", "patchgan_discriminator"},
            {"in_channels", 4},
            {"out_channels", 1},
            {"base_width", 32},
            {"depth", 3}}}}},
        {"train",
         {{"loss_kind", "hinge"},
          {"lambda_l1", 100.0},
          {"batch_size", 1},
          {"d_steps_per_g_step", 2},
          {"g_lr", {{"base", 1e-5}, {"max", 2e-4}}},
          {"d_lr", {{"base", 2e-5}, {"max", 4e-4}}},
          {"lr_step_size", 500},
          {"lr_policy", "cyclical_triangular"},
          {"spectral_norm_target", "generator"},
          {"total_g_steps", 2000},
          {"seed", 1}}},
        {"eval",
         {{"extractor", "seeded_random_projection"},
          {"extractor_seed", 17},
          {"feature_dim", 64},
          {"eval_every", 500},
          {"fid_max_samples", 0}}}};
}

namespace {

bool types_compatible(const json& schema, const json& value) {
    if (schema.is_number() && value.is_number()) return true;  // int literals for doubles etc.
    if (schema.is_object() && value.is_object()) return true;
    return schema.type() == value.type();
}

void merge_checked(json& dst, const json& src, const std::string& prefix) {
    for (auto it = src.begin(); it != src.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!dst.contains(it.key())) throw ConfigError("unknown config key: " + path);
        json& slot = dst[it.key()];
        if (!types_compatible(slot, it.value()))
            throw ConfigError("config key " + path + " has the wrong type");
        if (slot.is_object())
            merge_checked(slot, it.value(), path);
        else
            slot = it.value();
    }
}

}  // namespace

json resolve_config(const json& user) {
    if (!user.is_object()) throw ConfigError("config root must be a JSON object");
    json cfg = default_config_json();
    merge_checked(cfg, user, "");
    return cfg;
}

void apply_dotted_override(json& cfg, const std::string& dotted_key,
                           const std::string& value_text) {
    json* slot = &cfg;
    size_t start = 0;
    while (true) {
        const size_t dot = dotted_key.find('.', start);
        const std::string part = dotted_key.substr(start, dot - start);
        if (part.empty() || !slot->is_object() || !slot->contains(part))
            throw ConfigError("unknown config key: " + dotted_key);
        slot = &(*slot)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (slot->is_object()) throw ConfigError("config key " + dotted_key + " is a section");
    json value = json::parse(value_text, nullptr, false);
    if (value.is_discarded()) value = value_text;  // bare strings need no quotes
    if (!types_compatible(*slot, value))
        throw ConfigError("config key " + dotted_key + " has the wrong type");
    *slot = value;
}

namespace {

nn::NetworkSpec spec_from_section(const json& j) {
    nn::NetworkSpec s;
    s.kind = j.at("kind").get<std::string>();
    s.in_channels = j.at("in_channels").get<int>();
    s.out_channels = j.at("out_channels").get<int>();
    s.base_width = j.at("base_width").get<int>();
    s.depth = j.at("depth").get<int>();
    if (j.contains("dropout_p")) s.dropout_p = j.at("dropout_p").get<double>();
    return s;
}

}  // namespace

TrainSetup setup_from_config(const json& cfg) {
    TrainSetup s;
    const json& t = cfg.at("train");
    s.train.loss_kind = t.at("loss_kind").get<std::string>();
    s.train.lambda_l1 = t.at("lambda_l1").get<double>();
    s.train.batch_size = t.at("batch_size").get<int>();
    s.train.d_steps_per_g_step = t.at("d_steps_per_g_step").get<int>();
    s.train.g_lr_interval = {t.at("g_lr").at("base").get<double>(),
                             t.at("g_lr").at("max").get<double>()};
    s.train.d_lr_interval = {t.at("d_lr").at("base").get<double>(),
                             t.at("d_lr").at("max").get<double>()};
    s.train.lr_step_size = t.at("lr_step_size").get<long>();
    s.train.lr_policy = t.at("lr_policy").get<std::string>();
    s.train.spectral_norm_target = t.at("spectral_norm_target").get<std::string>();
    s.train.total_g_steps = t.at("total_g_steps").get<long>();
    s.train.seed = t.at("seed").get<uint64_t>();

    const json& a = cfg.at("augment");
    s.augment.resize_to = a.at("resize_to").get<int>();
    s.augment.crop_to = a.at("crop_to").get<int>();
    s.augment.flip_probability = a.at("flip_probability").get<double>();
    s.augment.max_rotation_deg = a.at("max_rotation_deg").get<double>();
    s.augment.salt_pepper_fraction = a.at("salt_pepper_fraction").get<double>();

    const json& m = cfg.at("model");
    s.generator = spec_from_section(m.at("generator"));
    s.discriminator = spec_from_section(m.at("discriminator"));

    const json& e = cfg.at("eval");
    if (e.at("extractor").get<std::string>() != "seeded_random_projection")
        throw ConfigError("eval.extractor must be seeded_random_projection");
    s.extractor_seed = e.at("extractor_seed").get<uint64_t>();
    s.feature_dim = e.at("feature_dim").get<int>();
    s.train.eval_every = e.at("eval_every").get<long>();
    s.fid_max_samples = e.at("fid_max_samples").get<int>();
    if (s.feature_dim < 1) throw ConfigError("eval.feature_dim must be >= 1");
    if (s.fid_max_samples < 0) throw ConfigError("eval.fid_max_samples must be >= 0");

    s.train.validate();
    try {
        s.generator.validate();
        s.discriminator.validate();
    } catch (const ArgumentError& err) {
        throw ConfigError(std::string("model config invalid: ") + err.what());
    }
    return s;
}

}  // namespace sketchloom

#include "nerf_i2i/config.hpp"

namespace nerf_i2i {

namespace {

using json = nlohmann::json;

bool compatible(const json& def, const json& val) {
    if (def.is_number() && val.is_number()) return !(def.is_number_integer() && val.is_number_float());
    if (def.is_string()) return val.is_string();
    if (def.is_boolean()) return val.is_boolean();
    if (def.is_array()) return val.is_array();
    if (def.is_object()) return val.is_object();
    return def.type() == val.type();
}

std::string type_name(const json& j) {
    if (j.is_number_integer()) return "integer";
    return j.type_name();
}

// Overlays `val` onto `target` (a defaults subtree), rejecting keys the defaults do not have.
void overlay(json& target, const json& val, const std::string& path) {
    if (!compatible(target, val))
        throw ConfigError("config field '" + path + "': expected " + type_name(target) + ", got " + type_name(val));
    if (!target.is_object()) {
        target = val;
        return;
    }
    for (const auto& [key, v] : val.items()) {
        const auto sub = path.empty() ? key : path + "." + key;
        if (!target.contains(key)) throw ConfigError("unknown config key '" + sub + "'");
        overlay(target[key], v, sub);
    }
}

void collect_paths(const json& j, const std::string& prefix, std::vector<std::string>& out) {
    if (!j.is_object()) return;
    for (const auto& [key, v] : j.items()) {
        const auto p = prefix.empty() ? key : prefix + "." + key;
        out.push_back(p);
        collect_paths(v, p, out);
    }
}

std::string resolve_key(const json& defaults, const std::string& key) {
    if (key.find('.') != std::string::npos || defaults.contains(key)) return key;
    std::vector<std::string> paths, matches;
    collect_paths(defaults, "", paths);
    for (const auto& p : paths) {
        const auto dot = p.rfind('.');
        if ((dot == std::string::npos ? p : p.substr(dot + 1)) == key) matches.push_back(p);
    }
    if (matches.empty()) throw ConfigError("unknown config key '" + key + "'");
    if (matches.size() > 1) {
        std::string msg = "ambiguous config key '" + key + "', use one of:";
        for (const auto& m : matches) msg += " " + m;
        throw ConfigError(msg);
    }
    return matches.front();
}

void apply_override(json& cfg, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "' is not KEY=VALUE");
    const auto path = resolve_key(cfg, spec.substr(0, eq));
    const auto text = spec.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &cfg;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(key)) throw ConfigError("unknown config key '" + path + "'");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    // Strings given as bare numbers ("--override data.path=123") stay strings.
    if (node->is_string() && !value.is_string()) value = text;
    overlay(*node, value, path);
}

template <class T>
T field(const json& j, const char* block, const char* key) {
    try {
        return j.at(block).at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + block + "." + key + "': " + e.what());
    }
}

template <class Fn>
void in_block(const char* block, Fn fn) {
    try {
        fn();
    } catch (const Error& e) {
        throw ConfigError(std::string("config block '") + block + "': " + e.what());
    }
}

}  // namespace

json default_config() {
    const RenderConfig render;
    const CameraPrior prior;
    const LossWeights w;
    const MetricProtocol metrics;
    const TranslateSettings tr;
    auto classes = json::array();
    for (const auto& s : default_scene_specs()) classes.push_back(s.to_json());
    return {
        {"seed", 0},
        {"architecture", ArchConfig{}.to_json()},
        {"render",
         {{"train_samples", 32}, {"eval_samples", 96}, {"stratified", true}, {"t_near", render.t_near},
          {"t_far", render.t_far}}},
        {"camera",
         {{"distance", prior.distance}, {"yaw_range", prior.yaw_range}, {"pitch_range", prior.pitch_range},
          {"fov_y", prior.fov_y}}},
        {"optimizer",
         {{"lr", 2e-4},
          {"batch", 8},
          {"steps", 200},
          {"gan_betas", {0.0, 0.99}},
          {"adaptor_lr", 2e-4},
          {"adaptor_betas", {0.5, 0.999}},
          {"checkpoint_interval", 0}}},
        {"loss_weights",
         {{"r1", w.r1},
          {"path", w.path},
          {"alignment", w.alignment},
          {"hierarchical", w.hierarchical},
          {"relative", w.relative},
          {"path_positions", 64},
          {"relative_anchors", 16},
          {"hierarchy_first", 1},
          {"hierarchy_last", -1}}},
        {"data", {{"source", "synthetic"}, {"path", ""}, {"n_per_class", 2000}, {"classes", classes}}},
        {"adaptor", {{"kind", "unet"}, {"plain_width", 64}}},
        {"finetune", {{"init", "transplant"}}},
        {"translate",
         {{"source_class", tr.source_class},
          {"target_class", tr.target_class},
          {"n_videos", tr.n_videos},
          {"n_frames", tr.n_frames},
          {"yaw_start", tr.yaw_start},
          {"yaw_end", tr.yaw_end},
          {"pitch", tr.pitch}}},
        {"metrics",
         {{"intervals", metrics.intervals},
          {"max_pairs", metrics.max_pairs},
          {"diversity_floor", metrics.diversity_floor}}},
        {"inputs", {{"dataset", ""}, {"checkpoint", ""}, {"videos", ""}, {"translations", ""}}},
    };
}

RunConfig resolve_config(const json& user, const std::vector<std::string>& overrides) {
    auto cfg = default_config();
    if (!user.is_null()) {
        if (!user.is_object()) throw ConfigError("config file must hold a JSON object");
        overlay(cfg, user, "");
    }
    for (const auto& o : overrides) apply_override(cfg, o);
    return config_from_resolved(cfg);
}

RunConfig config_from_resolved(const json& j) {
    RunConfig c;
    c.resolved = j;
    try {
        const auto& s = j.at("seed");
        if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0))
            throw ConfigError("config field 'seed': must be a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field 'seed': ") + e.what());
    }

    in_block("architecture", [&] { c.arch = ArchConfig::from_json(j.at("architecture")); });

    in_block("render", [&] {
        RenderConfig r;
        r.stratified = field<bool>(j, "render", "stratified");
        r.t_near = field<double>(j, "render", "t_near");
        r.t_far = field<double>(j, "render", "t_far");
        r.height = r.width = c.arch.feature_resolution;
        c.train_render = r;
        c.train_render.n_samples = field<std::int64_t>(j, "render", "train_samples");
        c.eval_render = r;
        c.eval_render.stratified = false;
        c.eval_render.n_samples = field<std::int64_t>(j, "render", "eval_samples");
        c.train_render.validate();
        c.eval_render.validate();
    });

    in_block("camera", [&] {
        c.prior.distance = field<double>(j, "camera", "distance");
        c.prior.yaw_range = field<double>(j, "camera", "yaw_range");
        c.prior.pitch_range = field<double>(j, "camera", "pitch_range");
        c.prior.fov_y = field<double>(j, "camera", "fov_y");
        c.prior.validate();
    });

    LossWeights w;
    in_block("loss_weights", [&] {
        w.r1 = field<double>(j, "loss_weights", "r1");
        w.path = field<double>(j, "loss_weights", "path");
        w.alignment = field<double>(j, "loss_weights", "alignment");
        w.hierarchical = field<double>(j, "loss_weights", "hierarchical");
        w.relative = field<double>(j, "loss_weights", "relative");
        w.validate();
    });

    in_block("optimizer", [&] {
        auto gan_betas = field<std::vector<double>>(j, "optimizer", "gan_betas");
        auto ad_betas = field<std::vector<double>>(j, "optimizer", "adaptor_betas");
        if (gan_betas.size() != 2 || ad_betas.size() != 2) throw ConfigError("betas need exactly two entries");
        for (auto b : {gan_betas[0], gan_betas[1], ad_betas[0], ad_betas[1]})
            if (!(b >= 0.0 && b < 1.0)) throw ConfigError("betas must lie in [0, 1)");

        auto& g = c.gan;
        g.steps = field<std::int64_t>(j, "optimizer", "steps");
        g.batch = field<std::int64_t>(j, "optimizer", "batch");
        g.lr = field<double>(j, "optimizer", "lr");
        g.beta1 = gan_betas[0];
        g.beta2 = gan_betas[1];
        g.weights = w;
        g.path_positions = field<std::int64_t>(j, "loss_weights", "path_positions");
        g.checkpoint_interval = field<std::int64_t>(j, "optimizer", "checkpoint_interval");
        g.render = c.train_render;
        g.prior = c.prior;
        g.validate();

        auto& a = c.adaptor_train;
        a.steps = g.steps;
        a.batch = g.batch;
        a.lr = field<double>(j, "optimizer", "adaptor_lr");
        a.beta1 = ad_betas[0];
        a.beta2 = ad_betas[1];
        a.weights = w;
        a.relative_anchors = field<std::int64_t>(j, "loss_weights", "relative_anchors");
        a.hierarchy_range.first = field<std::int64_t>(j, "loss_weights", "hierarchy_first");
        a.hierarchy_range.last = field<std::int64_t>(j, "loss_weights", "hierarchy_last");
        a.render = c.train_render;
        a.prior = c.prior;
        a.validate();
    });

    in_block("adaptor", [&] {
        c.adaptor.kind = field<std::string>(j, "adaptor", "kind");
        c.adaptor.plain_width = field<std::int64_t>(j, "adaptor", "plain_width");
        c.adaptor.resolution = c.arch.feature_resolution;
        c.adaptor.out_channels = c.arch.feature_channels();
        c.adaptor.validate();
    });

    in_block("finetune", [&] {
        c.finetune_init = field<std::string>(j, "finetune", "init");
        if (c.finetune_init != "transplant" && c.finetune_init != "scratch")
            throw ConfigError("init must be 'transplant' or 'scratch'");
    });

    in_block("data", [&] {
        c.data.source = field<std::string>(j, "data", "source");
        c.data.path = field<std::string>(j, "data", "path");
        c.data.n_per_class = field<std::int64_t>(j, "data", "n_per_class");
        for (const auto& s : j.at("data").at("classes")) c.data.classes.push_back(SceneSpec::from_json(s));
        if (c.data.source != "synthetic" && c.data.source != "folder")
            throw ConfigError("source must be 'synthetic' or 'folder'");
        if (c.data.source == "folder" && c.data.path.empty()) throw ConfigError("folder source needs data.path");
        if (c.data.n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
        if (c.data.source == "synthetic" && static_cast<std::int64_t>(c.data.classes.size()) != c.arch.num_classes)
            throw ConfigError(std::to_string(c.data.classes.size()) + " classes but architecture.num_classes = " +
                              std::to_string(c.arch.num_classes));
    });

    in_block("translate", [&] {
        auto& t = c.translate;
        t.source_class = field<std::int64_t>(j, "translate", "source_class");
        t.target_class = field<std::int64_t>(j, "translate", "target_class");
        t.n_videos = field<std::int64_t>(j, "translate", "n_videos");
        t.n_frames = field<std::int64_t>(j, "translate", "n_frames");
        t.yaw_start = field<double>(j, "translate", "yaw_start");
        t.yaw_end = field<double>(j, "translate", "yaw_end");
        t.pitch = field<double>(j, "translate", "pitch");
        for (auto l : {t.source_class, t.target_class})
            if (l < 1 || l > c.arch.num_classes)
                throw ConfigError("class " + std::to_string(l) + " outside {1.." + std::to_string(c.arch.num_classes) + "}");
        if (t.n_videos < 1) throw ConfigError("n_videos must be >= 1");
        if (t.n_frames < 2) throw ConfigError("n_frames must be >= 2");
    });

    in_block("metrics", [&] {
        c.metrics.intervals = field<std::vector<std::int64_t>>(j, "metrics", "intervals");
        c.metrics.max_pairs = field<std::int64_t>(j, "metrics", "max_pairs");
        c.metrics.diversity_floor = field<double>(j, "metrics", "diversity_floor");
        c.metrics.seed = sub_seed(c.seed, "metrics");
        c.metrics.validate();
    });

    in_block("inputs", [&] {
        c.inputs.dataset = field<std::string>(j, "inputs", "dataset");
        c.inputs.checkpoint = field<std::string>(j, "inputs", "checkpoint");
        c.inputs.videos = field<std::string>(j, "inputs", "videos");
        c.inputs.translations = field<std::string>(j, "inputs", "translations");
    });

    c.gan.seed = c.seed;
    c.adaptor_train.seed = sub_seed(c.seed, "adaptor");
    return c;
}

}  // namespace nerf_i2i

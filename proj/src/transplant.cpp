#include "nerf_i2i/transplant.hpp"

#include <set>

#include "nerf_i2i/i2i.hpp"

namespace nerf_i2i {

namespace {

// Default torch initializers draw from the global generator; pin it for reproducible builds.
template <class Fn>
auto seeded_construction(std::uint64_t seed, Fn fn) {
    torch::manual_seed(seed);
    return fn();
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

ArchConfig arch_of(const Checkpoint& ckpt) {
    if (!ckpt.manifest.contains("architecture"))
        throw TransplantError("checkpoint manifest has no architecture block");
    return ArchConfig::from_json(ckpt.manifest.at("architecture"));
}

std::map<std::string, torch::Tensor> named_state(torch::nn::Module& m) {
    std::map<std::string, torch::Tensor> out;
    for (auto& p : m.named_parameters()) out.emplace(p.key(), p.value());
    for (auto& b : m.named_buffers()) out.emplace(b.key(), b.value());
    return out;
}

// Executes `plan` from `source` into the freshly constructed `target`. Every target
// tensor must be covered exactly once; any mismatch is reported in one error.
void execute_plan(const TransplantPlan& plan, const Checkpoint& source, torch::nn::Module& target) {
    torch::NoGradGuard guard;
    auto state = named_state(target);
    std::set<std::string> covered(plan.fresh.begin(), plan.fresh.end());
    std::vector<std::string> problems;
    for (const auto& [src, dst] : plan.copies) {
        covered.insert(dst);
        auto s = source.tensors.find(src);
        auto d = state.find(dst);
        if (s == source.tensors.end()) {
            problems.push_back("source tensor " + src + " missing");
            continue;
        }
        if (d == state.end()) {
            problems.push_back("target tensor " + dst + " missing");
            continue;
        }
        if (s->second.sizes() != d->second.sizes()) {
            problems.push_back(src + " " + shape_str(s->second) + " -> " + dst + " " + shape_str(d->second));
            continue;
        }
        d->second.copy_(s->second.to(d->second.scalar_type()));
    }
    for (const auto& [name, _] : state)
        if (!covered.count(name)) problems.push_back("target tensor " + name + " neither copied nor fresh");
    if (!problems.empty()) {
        std::string msg = "transplant failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw TransplantError(msg);
    }
}

}  // namespace

nlohmann::json TransplantPlan::to_json() const {
    auto c = nlohmann::json::array();
    for (const auto& [s, d] : copies) c.push_back({{"from", s}, {"to", d}});
    return {{"copies", c}, {"fresh", fresh}};
}

TransplantPlan TransplantPlan::from_json(const nlohmann::json& j) {
    TransplantPlan p;
    for (const auto& c : j.at("copies")) p.copies.emplace_back(c.at("from").get<std::string>(), c.at("to").get<std::string>());
    p.fresh = j.at("fresh").get<std::vector<std::string>>();
    return p;
}

StyleNeRF load_model(const Checkpoint& ckpt) {
    const auto kind = ckpt.kind();
    if (kind != "unconditional" && kind != "conditional")
        throw TransplantError("expected an unconditional or conditional checkpoint, got kind '" + kind + "'");
    StyleNeRF model(arch_of(ckpt), kind == "conditional");
    ckpt.apply_to(*model);
    return model;
}

Checkpoint model_checkpoint(const StyleNeRF& model, std::int64_t step, std::uint64_t seed, nlohmann::json extra) {
    nlohmann::json m = {{"kind", model->conditional() ? "conditional" : "unconditional"},
                        {"architecture", model->arch().to_json()},
                        {"step", step},
                        {"seed", seed}};
    m.update(extra);
    return Checkpoint::from_module(*model, m);
}

Checkpoint init_unconditional(const ArchConfig& arch, std::uint64_t seed) {
    auto model = seeded_construction(sub_seed(seed, "init"), [&] { return StyleNeRF(arch, false); });
    return model_checkpoint(model, 0, seed);
}

Checkpoint init_conditional(const ArchConfig& arch, std::int64_t num_classes, std::uint64_t seed) {
    auto a = arch;
    a.num_classes = num_classes;
    auto model = seeded_construction(sub_seed(seed, "init"), [&] { return StyleNeRF(a, true); });
    auto gen = make_generator(sub_seed(seed, "fresh"));
    init_fresh(*model->embedding, gen);
    return model_checkpoint(model, 0, seed, {{"init", "scratch"}});
}

Checkpoint transplant_conditional(const Checkpoint& unconditional, std::int64_t num_classes, std::uint64_t seed) {
    if (unconditional.kind() != "unconditional")
        throw TransplantError("transplant source must be an unconditional checkpoint, got kind '" +
                              unconditional.kind() + "'");
    if (num_classes < 1) throw ConfigError("transplant: num_classes must be >= 1");
    auto arch = arch_of(unconditional);
    arch.num_classes = num_classes;
    auto model = seeded_construction(sub_seed(seed, "init"), [&] { return StyleNeRF(arch, true); });

    TransplantPlan plan;
    for (const auto& [name, _] : named_state(*model)) {
        if (starts_with(name, "embedding.") || starts_with(name, "disc.out.") ||
            starts_with(name, "mapping2.layers.0.")) {
            plan.fresh.push_back(name);
        } else if (starts_with(name, "mapping1.")) {
            plan.copies.emplace_back("mapping." + name.substr(9), name);
        } else if (starts_with(name, "mapping2.")) {
            plan.copies.emplace_back("mapping." + name.substr(9), name);
        } else {
            plan.copies.emplace_back(name, name);
        }
    }
    execute_plan(plan, unconditional, *model);

    auto gen = make_generator(sub_seed(seed, "fresh"));
    init_fresh(*model->embedding, gen);
    init_fresh(*model->disc->out, gen);
    init_fresh(*model->mapping2->layers[0], gen);

    nlohmann::json extra = {{"init", "transplant"},
                            {"transplant", plan.to_json()},
                            {"source", {{"kind", unconditional.kind()},
                                        {"step", unconditional.manifest.value("step", std::int64_t{0})}}}};
    return model_checkpoint(model, 0, seed, extra);
}

Checkpoint assemble_i2i(const Checkpoint& conditional, AdaptorConfig adaptor, std::uint64_t seed) {
    if (conditional.kind() != "conditional")
        throw TransplantError("I2I assembly needs a conditional checkpoint, got kind '" + conditional.kind() + "'");
    const auto arch = arch_of(conditional);
    auto bundle = seeded_construction(sub_seed(seed, "adaptor-init"), [&] { return I2IBundle(arch, adaptor); });

    TransplantPlan plan;
    for (const auto& [name, _] : named_state(*bundle)) {
        if (starts_with(name, "adaptor."))
            plan.fresh.push_back(name);
        else if (starts_with(name, "encoder."))
            plan.copies.emplace_back("disc.trunk." + name.substr(8), name);
        else
            plan.copies.emplace_back(name, name);
    }
    execute_plan(plan, conditional, *bundle);
    auto gen = make_generator(sub_seed(seed, "fresh"));
    init_fresh(*bundle->adaptor, gen);
    bundle->freeze_non_adaptor();

    nlohmann::json extra = {{"transplant", plan.to_json()},
                            {"seed", seed},
                            {"step", 0},
                            {"source", {{"kind", conditional.kind()},
                                        {"step", conditional.manifest.value("step", std::int64_t{0})}}}};
    return bundle_checkpoint(bundle, extra);
}

}  // namespace nerf_i2i

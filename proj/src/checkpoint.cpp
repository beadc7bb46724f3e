#include "nerf_i2i/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <set>

namespace fs = std::filesystem;

namespace nerf_i2i {

Checkpoint Checkpoint::from_module(const torch::nn::Module& module, nlohmann::json manifest) {
    Checkpoint ckpt;
    ckpt.manifest = std::move(manifest);
    for (const auto& p : module.named_parameters())
        ckpt.tensors.emplace(p.key(), p.value().detach().to(torch::kFloat32).clone());
    for (const auto& b : module.named_buffers())
        ckpt.tensors.emplace(b.key(), b.value().detach().to(torch::kFloat32).clone());
    return ckpt;
}

void Checkpoint::apply_to(torch::nn::Module& module) const {
    torch::NoGradGuard guard;
    std::set<std::string> seen;
    std::vector<std::string> problems;
    auto assign = [&](const std::string& name, torch::Tensor& target) {
        seen.insert(name);
        auto it = tensors.find(name);
        if (it == tensors.end()) {
            problems.push_back("missing " + name);
            return;
        }
        if (it->second.sizes() != target.sizes()) {
            problems.push_back(name + " shape " + shape_str(it->second) + " vs " + shape_str(target));
            return;
        }
        target.copy_(it->second.to(target.scalar_type()));
    };
    for (auto& p : module.named_parameters()) assign(p.key(), p.value());
    for (auto& b : module.named_buffers()) assign(b.key(), b.value());
    for (const auto& [name, _] : tensors)
        if (!seen.count(name)) problems.push_back("unexpected " + name);
    if (!problems.empty()) {
        std::string msg = "checkpoint does not match module:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw TransplantError(msg);
    }
}

void Checkpoint::save(const fs::path& dir) const {
    std::error_code ec;
    fs::create_directories(dir / "tensors", ec);
    if (ec) throw IoError("cannot create " + (dir / "tensors").string() + ": " + ec.message());

    auto m = manifest;
    auto entries = nlohmann::json::array();
    for (const auto& [name, t] : tensors) {
        entries.push_back({{"name", name}, {"shape", t.sizes().vec()}});
        write_f32le(dir / "tensors" / (name + ".f32le"), t);
    }
    m["tensors"] = entries;
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << m.dump(2) << "\n";
}

Checkpoint Checkpoint::load(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("no checkpoint manifest at " + (dir / "manifest.json").string());
    Checkpoint ckpt;
    try {
        ckpt.manifest = nlohmann::json::parse(in);
        for (const auto& e : ckpt.manifest.at("tensors")) {
            const auto name = e.at("name").get<std::string>();
            const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
            ckpt.tensors.emplace(name, read_f32le(dir / "tensors" / (name + ".f32le"), shape));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
    }
    ckpt.manifest.erase("tensors");
    return ckpt;
}

bool Checkpoint::identical(const Checkpoint& other) const {
    if (manifest != other.manifest || tensors.size() != other.tensors.size()) return false;
    for (const auto& [name, t] : tensors) {
        auto it = other.tensors.find(name);
        if (it == other.tensors.end() || it->second.sizes() != t.sizes()) return false;
        if (tensor_checksum({t}) != tensor_checksum({it->second}) || !torch::equal(t, it->second)) return false;
    }
    return true;
}

bool directories_identical(const fs::path& a, const fs::path& b) {
    auto listing = [](const fs::path& root) {
        std::set<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file()) files.insert(fs::relative(e.path(), root));
        return files;
    };
    const auto fa = listing(a);
    if (fa != listing(b)) return false;
    for (const auto& rel : fa) {
        std::ifstream ia(a / rel, std::ios::binary);
        std::ifstream ib(b / rel, std::ios::binary);
        std::string ca((std::istreambuf_iterator<char>(ia)), std::istreambuf_iterator<char>());
        std::string cb((std::istreambuf_iterator<char>(ib)), std::istreambuf_iterator<char>());
        if (ca != cb) return false;
    }
    return true;
}

}  // namespace nerf_i2i

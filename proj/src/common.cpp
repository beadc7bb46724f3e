#include "nerf_i2i/common.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <bit>
#include <fstream>
#include <sstream>

namespace nerf_i2i {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t sub_seed(std::uint64_t base, std::string_view name) {
    return splitmix64(base ^ fnv1a(name.data(), name.size()));
}

torch::Generator make_generator(std::uint64_t seed) {
    return at::make_generator<at::CPUGeneratorImpl>(seed);
}

std::string shape_str(const torch::Tensor& t) {
    std::ostringstream os;
    os << t.sizes();
    return os.str();
}

void expect_shape(const torch::Tensor& t, std::initializer_list<std::int64_t> expected,
                  std::string_view what) {
    bool ok = t.defined() && t.dim() == static_cast<std::int64_t>(expected.size());
    if (ok) {
        std::int64_t i = 0;
        for (auto e : expected) {
            if (e >= 0 && t.size(i) != e) ok = false;
            ++i;
        }
    }
    if (!ok) {
        std::ostringstream os;
        os << what << ": expected shape [";
        bool first = true;
        for (auto e : expected) {
            os << (first ? "" : ", ") << (e < 0 ? std::string("*") : std::to_string(e));
            first = false;
        }
        os << "], got " << (t.defined() ? shape_str(t) : std::string("undefined"));
        throw ShapeError(os.str());
    }
}

void write_f32le(const std::filesystem::path& path, const torch::Tensor& t) {
    static_assert(std::endian::native == std::endian::little, "f32le I/O assumes a little-endian host");
    auto c = t.detach().to(torch::kFloat32).contiguous().cpu();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(static_cast<const char*>(c.data_ptr()), static_cast<std::streamsize>(c.numel() * 4));
    if (!out) throw IoError("write failed: " + path.string());
}

torch::Tensor read_f32le(const std::filesystem::path& path, const std::vector<std::int64_t>& shape) {
    std::int64_t numel = 1;
    for (auto s : shape) numel *= s;
    std::error_code ec;
    const auto bytes = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + path.string());
    if (bytes != static_cast<std::uintmax_t>(numel) * 4)
        throw IoError(path.string() + ": expected " + std::to_string(numel * 4) + " bytes, found " +
                      std::to_string(bytes));
    auto t = torch::empty(shape, torch::kFloat32);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(numel * 4));
    if (!in) throw IoError("short read: " + path.string());
    return t;
}

std::uint64_t tensor_checksum(const std::vector<torch::Tensor>& tensors) {
    std::uint64_t h = kFnvOffset;
    for (const auto& t : tensors) {
        auto c = t.detach().contiguous().cpu();
        h = fnv1a(c.data_ptr(), c.numel() * c.element_size(), h);
    }
    return h;
}

}  // namespace nerf_i2i

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace nerf_i2i {

// Error taxonomy. Every failure mode surfaced by the library derives from Error
// so callers (the CLI in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define NERF_I2I_ERROR(Name)                 \
    class Name : public Error {              \
    public:                                  \
        using Error::Error;                  \
    }

NERF_I2I_ERROR(ShapeError);
NERF_I2I_ERROR(ConfigError);
NERF_I2I_ERROR(LabelError);
NERF_I2I_ERROR(NumericError);
NERF_I2I_ERROR(DataError);
NERF_I2I_ERROR(IoError);
NERF_I2I_ERROR(InvalidPoseError);
NERF_I2I_ERROR(TransplantError);
NERF_I2I_ERROR(ProtocolError);
NERF_I2I_ERROR(RangeError);
NERF_I2I_ERROR(FrozenAuditError);
NERF_I2I_ERROR(DiversityError);

#undef NERF_I2I_ERROR

/// Derives a stable sub-seed from a base seed and a stage name ("data", "init", ...).
std::uint64_t sub_seed(std::uint64_t base, std::string_view name);

/// CPU generator seeded deterministically.
torch::Generator make_generator(std::uint64_t seed);

std::string shape_str(const torch::Tensor& t);

/// Throws ShapeError unless `t` has exactly `expected` sizes (-1 matches anything).
void expect_shape(const torch::Tensor& t, std::initializer_list<std::int64_t> expected,
                  std::string_view what);

/// Raw little-endian float32 blob I/O (checkpoints, feature-map dumps).
void write_f32le(const std::filesystem::path& path, const torch::Tensor& t);
torch::Tensor read_f32le(const std::filesystem::path& path, const std::vector<std::int64_t>& shape);

/// Order-sensitive FNV-1a digest of the raw bytes of every tensor, used for freeze audits.
std::uint64_t tensor_checksum(const std::vector<torch::Tensor>& tensors);

}  // namespace nerf_i2i

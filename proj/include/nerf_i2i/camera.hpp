#pragma once

#include <array>
#include <vector>

#include <json.hpp>

#include "nerf_i2i/common.hpp"

namespace nerf_i2i {

using Vec3 = std::array<double, 3>;

/// Pinhole camera. `rotation` is camera-to-world, row-major, with columns
/// (right, down, forward): camera-space +z is the viewing direction.
struct CameraPose {
    Vec3 position{0.0, 0.0, 0.0};
    std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
    double fov_y = 0.5;

    Vec3 forward() const { return {rotation[2], rotation[5], rotation[8]}; }

    /// Throws InvalidPoseError if the rotation is not orthonormal or fov_y is outside (0, pi).
    void validate() const;

    bool operator==(const CameraPose&) const = default;
};

/// Camera at `position` looking at `target`, world up = +y.
CameraPose look_at(const Vec3& position, const Vec3& target, double fov_y);

struct Ray {
    Vec3 origin;
    Vec3 direction;
    double t_near;
    double t_far;
};

/// One ray per feature-grid pixel, stored as [H, W, 3] tensors.
struct RayGrid {
    torch::Tensor origins;
    torch::Tensor directions;
    double t_near = 0.0;
    double t_far = 1.0;

    std::int64_t height() const { return directions.size(0); }
    std::int64_t width() const { return directions.size(1); }
    Ray at(std::int64_t i, std::int64_t j) const;
};

/// Rays through pixel centers; pixel (i, j) is row i, column j.
RayGrid generate_rays(const CameraPose& pose, std::int64_t height, std::int64_t width,
                      double t_near = 2.0, double t_far = 6.0,
                      torch::Dtype dtype = torch::kFloat32);

nlohmann::json pose_to_json(const CameraPose& pose);
CameraPose pose_from_json(const nlohmann::json& j);

}  // namespace nerf_i2i

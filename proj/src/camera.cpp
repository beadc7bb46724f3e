#include "nerf_i2i/camera.hpp"

#include <cmath>
#include <numbers>

namespace nerf_i2i {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 normalized(const Vec3& v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n == 0.0) throw InvalidPoseError("look_at: degenerate direction");
    return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace

void CameraPose::validate() const {
    if (!(fov_y > 0.0 && fov_y < std::numbers::pi))
        throw InvalidPoseError("fov_y must lie in (0, pi), got " + std::to_string(fov_y));
    for (double v : position)
        if (!std::isfinite(v)) throw InvalidPoseError("camera position is not finite");
    // R * R^T == I
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += rotation[r * 3 + k] * rotation[c * 3 + k];
            const double expected = r == c ? 1.0 : 0.0;
            if (!(std::abs(dot - expected) <= 1e-6))
                throw InvalidPoseError("camera rotation is not orthonormal");
        }
    }
}

CameraPose look_at(const Vec3& position, const Vec3& target, double fov_y) {
    const Vec3 forward = normalized(sub(target, position));
    Vec3 up{0.0, 1.0, 0.0};
    if (std::abs(forward[1]) > 1.0 - 1e-9) up = {0.0, 0.0, 1.0};
    const Vec3 right = normalized(cross(forward, up));
    const Vec3 down = cross(forward, right);
    CameraPose pose;
    pose.position = position;
    pose.fov_y = fov_y;
    for (int r = 0; r < 3; ++r) {
        pose.rotation[r * 3 + 0] = right[r];
        pose.rotation[r * 3 + 1] = down[r];
        pose.rotation[r * 3 + 2] = forward[r];
    }
    return pose;
}

Ray RayGrid::at(std::int64_t i, std::int64_t j) const {
    auto o = origins.index({i, j}).to(torch::kFloat64);
    auto d = directions.index({i, j}).to(torch::kFloat64);
    auto oa = o.accessor<double, 1>();
    auto da = d.accessor<double, 1>();
    return Ray{{oa[0], oa[1], oa[2]}, {da[0], da[1], da[2]}, t_near, t_far};
}

RayGrid generate_rays(const CameraPose& pose, std::int64_t height, std::int64_t width,
                      double t_near, double t_far, torch::Dtype dtype) {
    pose.validate();
    if (height < 1 || width < 1) throw ShapeError("generate_rays: resolution must be >= 1");
    if (!(t_near >= 0.0 && t_near < t_far)) throw ConfigError("generate_rays: need 0 <= t_near < t_far");

    const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
    const double focal = 0.5 * static_cast<double>(height) / std::tan(0.5 * pose.fov_y);
    auto rows = (torch::arange(height, opts) + 0.5 - 0.5 * height) / focal;
    auto cols = (torch::arange(width, opts) + 0.5 - 0.5 * width) / focal;
    auto grid = torch::meshgrid({rows, cols}, "ij");
    auto cam = torch::stack({grid[1], grid[0], torch::ones_like(grid[0])}, -1);  // [H, W, 3]

    auto rot = torch::tensor(std::vector<double>(pose.rotation.begin(), pose.rotation.end()), opts)
                   .reshape({3, 3});
    auto dirs = torch::matmul(cam, rot.transpose(0, 1));
    dirs = dirs / dirs.norm(2, -1, true);
    auto origin = torch::tensor(std::vector<double>(pose.position.begin(), pose.position.end()), opts);

    RayGrid grid_out;
    grid_out.directions = dirs.to(dtype);
    grid_out.origins = origin.expand({height, width, 3}).contiguous().to(dtype);
    grid_out.t_near = t_near;
    grid_out.t_far = t_far;
    return grid_out;
}

nlohmann::json pose_to_json(const CameraPose& pose) {
    return {{"position", pose.position}, {"rotation", pose.rotation}, {"fov_y", pose.fov_y}};
}

CameraPose pose_from_json(const nlohmann::json& j) {
    CameraPose pose;
    try {
        const auto pos = j.at("position").get<std::vector<double>>();
        const auto rot = j.at("rotation").get<std::vector<double>>();
        if (pos.size() != 3 || rot.size() != 9)
            throw InvalidPoseError("pose json: position needs 3 and rotation 9 entries");
        std::copy(pos.begin(), pos.end(), pose.position.begin());
        std::copy(rot.begin(), rot.end(), pose.rotation.begin());
        pose.fov_y = j.at("fov_y").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidPoseError(std::string("pose json: ") + e.what());
    }
    pose.validate();
    return pose;
}

}  // namespace nerf_i2i

#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "nerf_i2i/camera.hpp"

namespace nerf_i2i {

// ---------------------------------------------------------------------------
// PNG I/O (8-bit RGB)
// ---------------------------------------------------------------------------

/// Writes a [3, H, W] image with values in [-1, 1].
void write_png(const std::filesystem::path& path, const torch::Tensor& image);
/// Decodes any 8/16-bit PNG into a [3, H, W] uint8 tensor (alpha dropped, gray expanded).
torch::Tensor read_png(const std::filesystem::path& path);

/// [-1, 1] float image -> the exact uint8 levels written to PNG, back in [-1, 1].
torch::Tensor quantize_image(const torch::Tensor& image);

// ---------------------------------------------------------------------------
// Camera prior and synthetic scenes
// ---------------------------------------------------------------------------

struct CameraPrior {
    double distance = 3.0;
    double yaw_range = 0.7853981633974483;    ///< +- radians (45 deg)
    double pitch_range = 0.2617993877991494;  ///< +- radians (15 deg)
    double fov_y = 0.6;

    void validate() const;
};

/// Camera on the sphere of radius `distance` at (yaw, pitch), looking at the origin.
/// yaw = pitch = 0 is the frontal pose at (0, 0, distance).
CameraPose orbit_pose(const CameraPrior& prior, double yaw, double pitch);

/// Uniform yaw/pitch inside the prior.
CameraPose sample_camera(const CameraPrior& prior, std::mt19937_64& rng);
std::vector<CameraPose> sample_cameras(const CameraPrior& prior, std::int64_t n, std::uint64_t seed);

enum class Primitive { Sphere, Box };

struct SceneSpec {
    std::string name = "sphere";
    Primitive primitive = Primitive::Sphere;
    Vec3 albedo_min{0.6, 0.1, 0.1};
    Vec3 albedo_max{0.95, 0.35, 0.3};
    double size_min = 0.6;  ///< sphere radius or box half-extent
    double size_max = 0.9;
    Vec3 light_direction{0.4, 0.7, 0.6};
    Vec3 background{0.85, 0.85, 0.85};

    void validate() const;
    nlohmann::json to_json() const;
    static SceneSpec from_json(const nlohmann::json& j);
};

/// Default desk-scale classes: red-hued spheres and blue-hued boxes.
std::vector<SceneSpec> default_scene_specs();

struct SceneInstance {
    SceneSpec spec;
    Vec3 albedo;
    double size;
};

SceneInstance sample_scene(const SceneSpec& spec, std::mt19937_64& rng);

/// Ray-traced Lambertian render, 2x2 supersampled, [3, R, R] in [-1, 1].
torch::Tensor render_scene(const SceneInstance& scene, const CameraPose& pose, std::int64_t resolution);

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct Sample {
    torch::Tensor image;  ///< [3, H, W] in [-1, 1]
    std::int64_t label;   ///< 1-based
};

/// Training data interface: images and labels only. Poses never enter it.
class ImageDataset {
public:
    ImageDataset(std::vector<torch::Tensor> images, std::vector<std::int64_t> labels, std::int64_t num_classes);

    std::int64_t size() const { return static_cast<std::int64_t>(images_.size()); }
    std::int64_t num_classes() const { return num_classes_; }
    std::int64_t resolution() const { return images_.empty() ? 0 : images_.front().size(-1); }
    Sample get(std::int64_t i) const;
    const std::vector<std::int64_t>& indices_of_class(std::int64_t label) const;
    /// Stacked images [N, 3, H, W] for the given indices.
    torch::Tensor batch(const std::vector<std::int64_t>& indices) const;
    torch::Tensor labels(const std::vector<std::int64_t>& indices) const;

    /// Number of ImageDataset objects ever constructed in this process (data-access audit).
    static std::int64_t constructions() { return constructions_.load(); }

private:
    std::vector<torch::Tensor> images_;
    std::vector<std::int64_t> labels_;
    std::int64_t num_classes_;
    std::vector<std::vector<std::int64_t>> by_class_;
    static std::atomic<std::int64_t> constructions_;
};

struct SyntheticDataset {
    std::vector<torch::Tensor> images;
    std::vector<std::int64_t> labels;
    std::vector<CameraPose> poses;  ///< evaluation metadata only
    nlohmann::json manifest;

    ImageDataset training_view() const;
};

/// One scene instance and one camera pose per sample. When `out_dir` is non-empty,
/// writes out_dir/<class_name>/NNNNN.png and out_dir/manifest.json.
SyntheticDataset render_synthetic_dataset(const std::vector<SceneSpec>& specs, std::int64_t n_per_class,
                                          std::int64_t resolution, const CameraPrior& prior, std::uint64_t seed,
                                          const std::filesystem::path& out_dir = {});

/// Loads a dataset written by render_synthetic_dataset (images + labels; poses ignored).
ImageDataset load_synthetic_dataset(const std::filesystem::path& root);

struct FolderLoadStats {
    std::int64_t loaded = 0;
    std::int64_t skipped = 0;
    std::vector<std::string> class_names;
};

/// root/<class>/<image>.png, classes sorted by name (label 1 = first). Images are
/// center-cropped to a square, bilinearly resized and mapped to [-1, 1].
ImageDataset load_image_folder(const std::filesystem::path& root, std::int64_t resolution,
                               FolderLoadStats* stats = nullptr);

/// Center crop to square + bilinear resize; input [3, H, W] float in [-1, 1].
torch::Tensor center_crop_resize(const torch::Tensor& image, std::int64_t resolution);

// ---------------------------------------------------------------------------
// Videos
// ---------------------------------------------------------------------------

struct VideoSequence {
    std::vector<torch::Tensor> frames;  ///< [3, H, W] in [-1, 1]
    std::vector<CameraPose> poses;

    /// [T, 3, H, W]
    torch::Tensor stacked() const;
};

/// Deterministic yaw sweep from yaw_start to yaw_end at fixed pitch around one scene instance.
VideoSequence render_orbit_video(const SceneInstance& scene, std::int64_t n_frames, double yaw_start, double yaw_end,
                                 double pitch, const CameraPrior& prior, std::int64_t resolution);

/// dir/00000.png ... + dir/trajectory.json (list of poses).
void save_video(const VideoSequence& video, const std::filesystem::path& dir);
VideoSequence load_video(const std::filesystem::path& dir);

}  // namespace nerf_i2i

#include "nerf_i2i/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;

namespace nerf_i2i {

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

torch::Tensor quantize_image(const torch::Tensor& image) {
    auto levels = ((image.detach().to(torch::kFloat32).clamp(-1.0, 1.0) + 1.0) * 127.5).round();
    return levels / 127.5 - 1.0;
}

void write_png(const fs::path& path, const torch::Tensor& image) {
    expect_shape(image, {3, -1, -1}, "write_png image");
    auto bytes = ((image.detach().to(torch::kFloat32).clamp(-1.0, 1.0) + 1.0) * 127.5)
                     .round()
                     .to(torch::kUInt8)
                     .permute({1, 2, 0})
                     .contiguous();
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.size(2));
    img.height = static_cast<png_uint_32>(image.size(1));
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data_ptr(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw IoError("cannot write PNG " + path.string() + ": " + msg);
    }
}

torch::Tensor read_png(const fs::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        std::string msg = img.message;
        png_image_free(&img);
        throw IoError("cannot decode PNG " + path.string() + ": " + msg);
    }
    img.format = PNG_FORMAT_RGB;
    auto buf = torch::empty({static_cast<std::int64_t>(img.height), static_cast<std::int64_t>(img.width), 3},
                            torch::kUInt8);
    if (!png_image_finish_read(&img, nullptr, buf.data_ptr(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw IoError("cannot decode PNG " + path.string() + ": " + msg);
    }
    return buf.permute({2, 0, 1}).contiguous();
}

namespace {

torch::Tensor bytes_to_signed(const torch::Tensor& bytes) { return bytes.to(torch::kFloat32) / 127.5 - 1.0; }

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 unit(const Vec3& v) {
    const double n = std::sqrt(dot(v, v));
    return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 lerp(const Vec3& a, const Vec3& b, const Vec3& t) {
    return {a[0] + (b[0] - a[0]) * t[0], a[1] + (b[1] - a[1]) * t[1], a[2] + (b[2] - a[2]) * t[2]};
}

Primitive primitive_from_string(const std::string& s) {
    if (s == "sphere") return Primitive::Sphere;
    if (s == "box") return Primitive::Box;
    throw ConfigError("unknown primitive '" + s + "' (expected sphere | box)");
}

std::string primitive_name(Primitive p) { return p == Primitive::Sphere ? "sphere" : "box"; }

std::string frame_name(std::int64_t i) {
    std::ostringstream os;
    os << std::setw(5) << std::setfill('0') << i << ".png";
    return os.str();
}

/// Hit distance and surface normal; returns false on a miss.
bool intersect(const SceneInstance& scene, const Vec3& o, const Vec3& d, Vec3& normal) {
    if (scene.spec.primitive == Primitive::Sphere) {
        const double b = dot(o, d);
        const double c = dot(o, o) - scene.size * scene.size;
        const double disc = b * b - c;
        if (disc < 0.0) return false;
        const double t = -b - std::sqrt(disc);
        if (t <= 0.0) return false;
        const Vec3 p{o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]};
        normal = {p[0] / scene.size, p[1] / scene.size, p[2] / scene.size};
        return true;
    }
    double t_enter = -1e300;
    double t_exit = 1e300;
    int axis = -1;
    double sign = 0.0;
    for (int k = 0; k < 3; ++k) {
        if (std::abs(d[k]) < 1e-12) {
            if (std::abs(o[k]) > scene.size) return false;
            continue;
        }
        double t0 = (-scene.size - o[k]) / d[k];
        double t1 = (scene.size - o[k]) / d[k];
        double s = -1.0;
        if (t0 > t1) {
            std::swap(t0, t1);
            s = 1.0;
        }
        if (t0 > t_enter) {
            t_enter = t0;
            axis = k;
            sign = s;
        }
        t_exit = std::min(t_exit, t1);
    }
    if (axis < 0 || t_enter > t_exit || t_enter <= 0.0) return false;
    normal = {0.0, 0.0, 0.0};
    normal[static_cast<std::size_t>(axis)] = sign;
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cameras and scenes
// ---------------------------------------------------------------------------

void CameraPrior::validate() const {
    const double half_pi = 1.5707963267948966;
    if (!(distance > 0.0)) throw ConfigError("camera prior: distance must be positive");
    if (!(yaw_range >= 0.0 && yaw_range < half_pi)) throw ConfigError("camera prior: yaw range outside [0, pi/2)");
    if (!(pitch_range >= 0.0 && pitch_range < half_pi))
        throw ConfigError("camera prior: pitch range outside [0, pi/2)");
    if (!(fov_y > 0.0 && fov_y < 3.141592653589793)) throw ConfigError("camera prior: fov_y outside (0, pi)");
}

CameraPose orbit_pose(const CameraPrior& prior, double yaw, double pitch) {
    const Vec3 position{prior.distance * std::cos(pitch) * std::sin(yaw), prior.distance * std::sin(pitch),
                        prior.distance * std::cos(pitch) * std::cos(yaw)};
    return look_at(position, {0.0, 0.0, 0.0}, prior.fov_y);
}

CameraPose sample_camera(const CameraPrior& prior, std::mt19937_64& rng) {
    prior.validate();
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double yaw = prior.yaw_range * u(rng);
    const double pitch = prior.pitch_range * u(rng);
    return orbit_pose(prior, yaw, pitch);
}

std::vector<CameraPose> sample_cameras(const CameraPrior& prior, std::int64_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<CameraPose> poses;
    poses.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) poses.push_back(sample_camera(prior, rng));
    return poses;
}

void SceneSpec::validate() const {
    for (int k = 0; k < 3; ++k) {
        if (!(albedo_min[k] >= 0.0 && albedo_min[k] <= albedo_max[k] && albedo_max[k] <= 1.0))
            throw ConfigError("scene '" + name + "': albedo range must satisfy 0 <= min <= max <= 1");
        if (!(background[k] >= 0.0 && background[k] <= 1.0))
            throw ConfigError("scene '" + name + "': background outside [0, 1]");
    }
    if (!(size_min > 0.0 && size_min <= size_max))
        throw ConfigError("scene '" + name + "': size range must satisfy 0 < min <= max");
    if (dot(light_direction, light_direction) <= 0.0) throw ConfigError("scene '" + name + "': zero light direction");
    if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("scene name must be a plain folder name");
}

nlohmann::json SceneSpec::to_json() const {
    return {{"name", name},
            {"primitive", primitive_name(primitive)},
            {"albedo_min", albedo_min},
            {"albedo_max", albedo_max},
            {"size_min", size_min},
            {"size_max", size_max},
            {"light_direction", light_direction},
            {"background", background}};
}

SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
    SceneSpec s;
    try {
        s.name = j.at("name").get<std::string>();
        s.primitive = primitive_from_string(j.at("primitive").get<std::string>());
        s.albedo_min = j.at("albedo_min").get<Vec3>();
        s.albedo_max = j.at("albedo_max").get<Vec3>();
        s.size_min = j.at("size_min").get<double>();
        s.size_max = j.at("size_max").get<double>();
        s.light_direction = j.at("light_direction").get<Vec3>();
        s.background = j.at("background").get<Vec3>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scene spec: ") + e.what());
    }
    s.validate();
    return s;
}

std::vector<SceneSpec> default_scene_specs() {
    SceneSpec sphere;
    SceneSpec box;
    box.name = "box";
    box.primitive = Primitive::Box;
    box.albedo_min = {0.1, 0.2, 0.6};
    box.albedo_max = {0.3, 0.4, 0.95};
    box.size_min = 0.45;
    box.size_max = 0.65;
    return {sphere, box};
}

SceneInstance sample_scene(const SceneSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Vec3 t{u(rng), u(rng), u(rng)};
    const double s = u(rng);
    return {spec, lerp(spec.albedo_min, spec.albedo_max, t), spec.size_min + (spec.size_max - spec.size_min) * s};
}

torch::Tensor render_scene(const SceneInstance& scene, const CameraPose& pose, std::int64_t resolution) {
    if (resolution < 1) throw ConfigError("render_scene: resolution must be >= 1");
    const auto rays = generate_rays(pose, 2 * resolution, 2 * resolution, 0.0, 1.0, torch::kFloat64);
    auto dirs = rays.directions.contiguous();
    auto da = dirs.accessor<double, 3>();
    const Vec3 light = unit(scene.spec.light_direction);
    const Vec3& o = pose.position;

    auto out = torch::empty({3, 2 * resolution, 2 * resolution}, torch::kFloat64);
    auto oa = out.accessor<double, 3>();
    for (std::int64_t i = 0; i < 2 * resolution; ++i) {
        for (std::int64_t j = 0; j < 2 * resolution; ++j) {
            const Vec3 d{da[i][j][0], da[i][j][1], da[i][j][2]};
            Vec3 n;
            if (intersect(scene, o, d, n)) {
                const double shade = 0.25 + 0.75 * std::max(0.0, dot(n, light));
                for (int c = 0; c < 3; ++c) oa[c][i][j] = scene.albedo[static_cast<std::size_t>(c)] * shade;
            } else {
                for (int c = 0; c < 3; ++c) oa[c][i][j] = scene.spec.background[static_cast<std::size_t>(c)];
            }
        }
    }
    auto img = torch::avg_pool2d(out.unsqueeze(0), {2, 2}).squeeze(0);
    return (img * 2.0 - 1.0).to(torch::kFloat32);
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

std::atomic<std::int64_t> ImageDataset::constructions_{0};

ImageDataset::ImageDataset(std::vector<torch::Tensor> images, std::vector<std::int64_t> labels,
                           std::int64_t num_classes)
    : images_(std::move(images)), labels_(std::move(labels)), num_classes_(num_classes) {
    ++constructions_;
    if (images_.size() != labels_.size()) throw DataError("dataset: image and label counts differ");
    if (num_classes_ < 1) throw DataError("dataset: needs at least one class");
    by_class_.resize(static_cast<std::size_t>(num_classes_));
    for (std::size_t i = 0; i < images_.size(); ++i) {
        const auto l = labels_[i];
        if (l < 1 || l > num_classes_)
            throw DataError("dataset: label " + std::to_string(l) + " outside {1.." + std::to_string(num_classes_) + "}");
        expect_shape(images_[i], {3, -1, -1}, "dataset image");
        if (images_[i].sizes() != images_.front().sizes()) throw DataError("dataset: images differ in size");
        by_class_[static_cast<std::size_t>(l - 1)].push_back(static_cast<std::int64_t>(i));
    }
}

Sample ImageDataset::get(std::int64_t i) const {
    if (i < 0 || i >= size()) throw DataError("dataset index out of range");
    return {images_[static_cast<std::size_t>(i)], labels_[static_cast<std::size_t>(i)]};
}

const std::vector<std::int64_t>& ImageDataset::indices_of_class(std::int64_t label) const {
    if (label < 1 || label > num_classes_) throw LabelError("no class " + std::to_string(label));
    return by_class_[static_cast<std::size_t>(label - 1)];
}

torch::Tensor ImageDataset::batch(const std::vector<std::int64_t>& indices) const {
    std::vector<torch::Tensor> xs;
    xs.reserve(indices.size());
    for (auto i : indices) xs.push_back(get(i).image);
    return torch::stack(xs);
}

torch::Tensor ImageDataset::labels(const std::vector<std::int64_t>& indices) const {
    std::vector<std::int64_t> ls;
    ls.reserve(indices.size());
    for (auto i : indices) ls.push_back(get(i).label);
    return torch::tensor(ls, torch::kLong);
}

ImageDataset SyntheticDataset::training_view() const {
    const auto n_classes = manifest.at("spec").at("classes").size();
    return ImageDataset(images, labels, static_cast<std::int64_t>(n_classes));
}

SyntheticDataset render_synthetic_dataset(const std::vector<SceneSpec>& specs, std::int64_t n_per_class,
                                          std::int64_t resolution, const CameraPrior& prior, std::uint64_t seed,
                                          const fs::path& out_dir) {
    if (specs.empty()) throw ConfigError("synthetic dataset: no scene specs");
    if (n_per_class < 1) throw ConfigError("synthetic dataset: n_per_class must be >= 1");
    prior.validate();
    for (const auto& s : specs) s.validate();

    if (!out_dir.empty()) {
        std::error_code ec;
        for (const auto& s : specs) {
            fs::create_directories(out_dir / s.name, ec);
            if (ec) throw IoError("cannot create " + (out_dir / s.name).string() + ": " + ec.message());
        }
    }

    SyntheticDataset ds;
    std::mt19937_64 rng(seed);
    auto entries = nlohmann::json::array();
    for (std::size_t c = 0; c < specs.size(); ++c) {
        for (std::int64_t i = 0; i < n_per_class; ++i) {
            const auto scene = sample_scene(specs[c], rng);
            const auto pose = sample_camera(prior, rng);
            auto image = quantize_image(render_scene(scene, pose, resolution));
            const auto rel = specs[c].name + "/" + frame_name(i);
            if (!out_dir.empty()) write_png(out_dir / rel, image);
            ds.images.push_back(image);
            ds.labels.push_back(static_cast<std::int64_t>(c) + 1);
            ds.poses.push_back(pose);
            entries.push_back({{"path", rel}, {"label", static_cast<std::int64_t>(c) + 1}, {"pose", pose_to_json(pose)}});
        }
    }
    auto classes = nlohmann::json::array();
    for (const auto& s : specs) classes.push_back(s.to_json());
    ds.manifest = {{"entries", entries},
                   {"seed", seed},
                   {"spec",
                    {{"classes", classes},
                     {"n_per_class", n_per_class},
                     {"resolution", resolution},
                     {"camera", {{"distance", prior.distance},
                                 {"yaw_range", prior.yaw_range},
                                 {"pitch_range", prior.pitch_range},
                                 {"fov_y", prior.fov_y}}}}}};
    if (!out_dir.empty()) {
        std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
        if (!out) throw IoError("cannot write " + (out_dir / "manifest.json").string());
        out << ds.manifest.dump(2) << "\n";
    }
    return ds;
}

ImageDataset load_synthetic_dataset(const fs::path& root) {
    std::ifstream in(root / "manifest.json");
    if (!in) throw DataError("no dataset manifest at " + (root / "manifest.json").string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed dataset manifest: " + std::string(e.what()));
    }
    std::vector<torch::Tensor> images;
    std::vector<std::int64_t> labels;
    for (const auto& e : manifest.at("entries")) {
        images.push_back(bytes_to_signed(read_png(root / e.at("path").get<std::string>())));
        labels.push_back(e.at("label").get<std::int64_t>());
    }
    if (images.empty()) throw DataError("dataset at " + root.string() + " is empty");
    return ImageDataset(std::move(images), std::move(labels),
                        static_cast<std::int64_t>(manifest.at("spec").at("classes").size()));
}

torch::Tensor center_crop_resize(const torch::Tensor& image, std::int64_t resolution) {
    expect_shape(image, {3, -1, -1}, "center_crop_resize input");
    const auto h = image.size(1);
    const auto w = image.size(2);
    const auto s = std::min(h, w);
    auto crop = image.slice(1, (h - s) / 2, (h - s) / 2 + s).slice(2, (w - s) / 2, (w - s) / 2 + s);
    if (s == resolution) return crop.contiguous();
    namespace F = torch::nn::functional;
    return F::interpolate(crop.unsqueeze(0), F::InterpolateFuncOptions()
                                                 .size(std::vector<std::int64_t>{resolution, resolution})
                                                 .mode(torch::kBilinear)
                                                 .align_corners(false))
        .squeeze(0);
}

ImageDataset load_image_folder(const fs::path& root, std::int64_t resolution, FolderLoadStats* stats) {
    if (!fs::is_directory(root)) throw DataError("image folder does not exist: " + root.string());
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw DataError("image folder has no class subfolders: " + root.string());

    FolderLoadStats local;
    std::vector<torch::Tensor> images;
    std::vector<std::int64_t> labels;
    for (std::size_t c = 0; c < class_dirs.size(); ++c) {
        local.class_names.push_back(class_dirs[c].filename().string());
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(class_dirs[c]))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            try {
                images.push_back(center_crop_resize(bytes_to_signed(read_png(f)), resolution));
                labels.push_back(static_cast<std::int64_t>(c) + 1);
                ++local.loaded;
            } catch (const IoError&) {
                ++local.skipped;
            }
        }
    }
    if (stats) *stats = local;
    if (images.empty()) throw DataError("image folder contains no decodable images: " + root.string());
    return ImageDataset(std::move(images), std::move(labels), static_cast<std::int64_t>(class_dirs.size()));
}

// ---------------------------------------------------------------------------
// Videos
// ---------------------------------------------------------------------------

torch::Tensor VideoSequence::stacked() const {
    if (frames.empty()) throw DataError("empty video");
    return torch::stack(frames);
}

VideoSequence render_orbit_video(const SceneInstance& scene, std::int64_t n_frames, double yaw_start, double yaw_end,
                                 double pitch, const CameraPrior& prior, std::int64_t resolution) {
    if (n_frames < 2) throw ConfigError("orbit video needs at least 2 frames");
    VideoSequence video;
    const double span = static_cast<double>(n_frames - 1);
    for (std::int64_t i = 0; i < n_frames; ++i) {
        // Symmetric in (start, end) so a reversed sweep yields exactly the reversed frames.
        const double yaw = (static_cast<double>(n_frames - 1 - i) * yaw_start + static_cast<double>(i) * yaw_end) / span;
        const auto pose = orbit_pose(prior, yaw, pitch);
        video.poses.push_back(pose);
        video.frames.push_back(quantize_image(render_scene(scene, pose, resolution)));
    }
    return video;
}

void save_video(const VideoSequence& video, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t i = 0; i < video.frames.size(); ++i)
        write_png(dir / frame_name(static_cast<std::int64_t>(i)), video.frames[i]);
    auto traj = nlohmann::json::array();
    for (const auto& p : video.poses) traj.push_back(pose_to_json(p));
    std::ofstream out(dir / "trajectory.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "trajectory.json").string());
    out << traj.dump(2) << "\n";
}

VideoSequence load_video(const fs::path& dir) {
    std::vector<fs::path> files;
    if (fs::is_directory(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no frames in video directory " + dir.string());
    VideoSequence video;
    for (const auto& f : files) video.frames.push_back(bytes_to_signed(read_png(f)));
    std::ifstream in(dir / "trajectory.json");
    if (in) {
        for (const auto& p : nlohmann::json::parse(in)) video.poses.push_back(pose_from_json(p));
        if (video.poses.size() != video.frames.size())
            throw DataError("trajectory.json length does not match frame count in " + dir.string());
    }
    return video;
}

}  // namespace nerf_i2i

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "intent/trajectory.hpp"
#include "intent/world.hpp"

namespace intent {

// Per-pixel class probability grid produced by a segmenter (here: rendered
// synthetically from the world mask). Probabilities are stored class-minor,
// row-major, as 32-bit floats so files round-trip bit-exactly.
struct SegMap {
  int width = 0;
  int height = 0;
  int num_classes = 0;
  std::vector<float> probs;  // [(y * width + x) * num_classes + c]
  std::vector<std::string> class_names;
  std::vector<int> traversable_set;

  float prob(int px, int py, int c) const {
    return probs[(static_cast<std::size_t>(py) * width + px) * num_classes + c];
  }
  float& prob_ref(int px, int py, int c) {
    return probs[(static_cast<std::size_t>(py) * width + px) * num_classes + c];
  }
  // Sum of traversable-class probabilities at one pixel.
  double traversable_prob(int px, int py) const;
  // Per-pixel distributions sum to 1 within 1e-6 and are non-negative.
  void validate() const;
};

// Pinhole camera with pose given camera-to-world: K intrinsics, (R, t) the
// camera rotation/translation in world coordinates. Camera frame convention:
// +x right, +y down, +z forward (optical axis).
struct CameraModel {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  int image_width = 0;
  int image_height = 0;

  // K upper-triangular with positive focals, R orthonormal with det +1.
  void validate() const;
};

// Projects a ground-plane point (z = 0) into the image. Returns nullopt when
// the point is behind the camera (depth <= 0) or rounds outside the image.
std::optional<Eigen::Vector2d> project(const CameraModel& cam, const Vec2& ground);

// Intersects the pixel ray with the ground plane. Returns nullopt when the
// ray is parallel to the plane or points away from it.
std::optional<Vec2> back_project(const CameraModel& cam, const Eigen::Vector2d& pixel);

bool pixel_in_image(const CameraModel& cam, const Eigen::Vector2d& pixel);

// Region around the vehicle treated as traversable by fiat.
struct FootprintDisk {
  Vec2 center;
  double radius = 0.5;
};

// Traversability score of one waypoint:
//   1            inside the footprint disk
//   0.5          outside the visible area (behind camera / above horizon /
//                off the image)
//   sum of traversable-class probabilities at the nearest pixel otherwise
double waypoint_prob(const Vec2& x, const SegMap& seg, const CameraModel& cam,
                     const FootprintDisk& foot);

// Product of waypoint_prob over all waypoints; in [0, 1].
double trajectory_prob(const Trajectory& traj, const SegMap& seg, const CameraModel& cam,
                       const FootprintDisk& foot);

// Forward-facing camera rig mounted on the agent.
struct CameraRigConfig {
  int image_width = 160;
  int image_height = 120;
  double fx = 130.0, fy = 130.0;
  double cx = 80.0, cy = 60.0;
  double height = 1.2;       // mount height above ground, meters
  double pitch_down = 0.35;  // radians below horizontal
};

CameraModel make_onboard_camera(const Pose2D& agent, const CameraRigConfig& rig = {});

// Renders class probabilities by casting each pixel ray onto the world:
// sky above the horizon, obstacle for blocked/out-of-extent ground, sidewalk
// for traversable cells bordering blocked ones, road elsewhere. label_noise
// is the probability mass leaked uniformly from the true class to the others.
SegMap render_synthetic_segmap(const World& world, const CameraModel& cam, double label_noise);

extern const std::vector<std::string> kSegClassNames;  // road, sidewalk, obstacle, sky
extern const std::vector<int> kTraversableClasses;     // {0, 1}

// Binary segmap file (magic, dimensions, class table, little-endian f32
// payload); round-trips bit-exactly.
void save_segmap(const SegMap& seg, const std::string& path);
SegMap load_segmap(const std::string& path);

// Camera JSON: fx, fy, cx, cy, image size, and a 4x4 camera-to-world matrix.
void save_camera(const CameraModel& cam, const std::string& path);
CameraModel load_camera(const std::string& path);

// --- raster output ---

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct Raster {
  int width = 0, height = 0;
  std::vector<Rgb> pixels;

  Raster() = default;
  Raster(int w, int h, Rgb fill = {0, 0, 0}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  Rgb& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  Rgb at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct TrajectoryStyle {
  Rgb color;
  int thickness = 1;
};

// Most-likely-class false-color image of a segmap.
Raster segmap_background(const SegMap& seg);

// Draws each trajectory as a projected polyline with waypoint markers;
// invisible waypoints break the polyline. The input raster is not modified.
Raster render_overlay(const Raster& background, const CameraModel& cam,
                      const std::vector<std::pair<Trajectory, TrajectoryStyle>>& items);

// Binary PPM (P6).
void save_ppm(const Raster& raster, const std::string& path);
Raster load_ppm(const std::string& path);

}  // namespace intent

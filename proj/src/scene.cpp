#include "intent/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "intent/errors.hpp"

namespace intent {

const std::vector<std::string> kSegClassNames = {"road", "sidewalk", "obstacle", "sky"};
const std::vector<int> kTraversableClasses = {0, 1};

namespace {
constexpr int kRoad = 0;
constexpr int kSidewalk = 1;
constexpr int kObstacle = 2;
constexpr int kSky = 3;
}  // namespace

double SegMap::traversable_prob(int px, int py) const {
  double p = 0.0;
  for (int c : traversable_set) p += prob(px, py, c);
  return p;
}

void SegMap::validate() const {
  if (width <= 0 || height <= 0 || num_classes <= 0) {
    throw data_error("SegMap: non-positive dimensions");
  }
  if (probs.size() != static_cast<std::size_t>(width) * height * num_classes) {
    throw data_error("SegMap: probability buffer size mismatch");
  }
  if (static_cast<int>(class_names.size()) != num_classes) {
    throw data_error("SegMap: class name table size mismatch");
  }
  for (int c : traversable_set) {
    if (c < 0 || c >= num_classes) throw data_error("SegMap: traversable class out of range");
  }
  for (int py = 0; py < height; ++py) {
    for (int px = 0; px < width; ++px) {
      double sum = 0.0;
      for (int c = 0; c < num_classes; ++c) {
        const float p = prob(px, py, c);
        if (p < 0.0f || !std::isfinite(p)) {
          throw data_error("SegMap: negative or non-finite probability at pixel (" +
                           std::to_string(px) + "," + std::to_string(py) + ")");
        }
        sum += p;
      }
      if (std::fabs(sum - 1.0) > 1e-6) {
        throw data_error("SegMap: probabilities at pixel (" + std::to_string(px) + "," +
                         std::to_string(py) + ") sum to " + std::to_string(sum));
      }
    }
  }
}

void CameraModel::validate() const {
  if (image_width <= 0 || image_height <= 0) throw data_error("CameraModel: bad image size");
  if (!(k(0, 0) > 0.0) || !(k(1, 1) > 0.0)) throw data_error("CameraModel: non-positive focal length");
  if (std::fabs(k(1, 0)) > 1e-9 || std::fabs(k(2, 0)) > 1e-9 || std::fabs(k(2, 1)) > 1e-9 ||
      std::fabs(k(2, 2) - 1.0) > 1e-9) {
    throw data_error("CameraModel: K is not upper-triangular with unit scale");
  }
  const Eigen::Matrix3d should_be_identity = r.transpose() * r - Eigen::Matrix3d::Identity();
  if (should_be_identity.cwiseAbs().maxCoeff() > 1e-9) {
    throw data_error("CameraModel: R is not orthonormal");
  }
  if (std::fabs(r.determinant() - 1.0) > 1e-9) {
    throw data_error("CameraModel: R has determinant != +1");
  }
}

bool pixel_in_image(const CameraModel& cam, const Eigen::Vector2d& pixel) {
  const long px = std::lround(pixel.x());
  const long py = std::lround(pixel.y());
  return px >= 0 && px < cam.image_width && py >= 0 && py < cam.image_height;
}

std::optional<Eigen::Vector2d> project(const CameraModel& cam, const Vec2& ground) {
  const Eigen::Vector3d world(ground.x, ground.y, 0.0);
  const Eigen::Vector3d in_cam = cam.r.transpose() * (world - cam.t);
  if (in_cam.z() <= 0.0) return std::nullopt;  // behind the camera
  const Eigen::Vector3d homo = cam.k * in_cam;
  const Eigen::Vector2d pixel(homo.x() / homo.z(), homo.y() / homo.z());
  if (!pixel_in_image(cam, pixel)) return std::nullopt;
  return pixel;
}

std::optional<Vec2> back_project(const CameraModel& cam, const Eigen::Vector2d& pixel) {
  const Eigen::Vector3d ray_cam = cam.k.inverse() * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
  const Eigen::Vector3d ray_world = cam.r * ray_cam;
  if (ray_world.z() >= -1e-12) return std::nullopt;  // parallel to or away from the ground
  const double s = -cam.t.z() / ray_world.z();
  if (s <= 0.0) return std::nullopt;
  const Eigen::Vector3d hit = cam.t + s * ray_world;
  return Vec2{hit.x(), hit.y()};
}

double waypoint_prob(const Vec2& x, const SegMap& seg, const CameraModel& cam,
                     const FootprintDisk& foot) {
  if ((x - foot.center).norm() <= foot.radius) return 1.0;
  const auto pixel = project(cam, x);
  if (!pixel.has_value()) return 0.5;
  const int px = static_cast<int>(std::lround(pixel->x()));
  const int py = static_cast<int>(std::lround(pixel->y()));
  return std::clamp(seg.traversable_prob(px, py), 0.0, 1.0);
}

double trajectory_prob(const Trajectory& traj, const SegMap& seg, const CameraModel& cam,
                       const FootprintDisk& foot) {
  traj.validate();
  double p = 1.0;
  for (const Vec2& x : traj.positions) p *= waypoint_prob(x, seg, cam, foot);
  return p;
}

CameraModel make_onboard_camera(const Pose2D& agent, const CameraRigConfig& rig) {
  CameraModel cam;
  cam.image_width = rig.image_width;
  cam.image_height = rig.image_height;
  cam.k << rig.fx, 0.0, rig.cx, 0.0, rig.fy, rig.cy, 0.0, 0.0, 1.0;

  const double cy = std::cos(agent.heading), sy = std::sin(agent.heading);
  const double cp = std::cos(rig.pitch_down), sp = std::sin(rig.pitch_down);
  const Eigen::Vector3d forward(cy * cp, sy * cp, -sp);
  const Eigen::Vector3d right(sy, -cy, 0.0);
  const Eigen::Vector3d down = forward.cross(right);
  cam.r.col(0) = right;
  cam.r.col(1) = down;
  cam.r.col(2) = forward;
  cam.t = Eigen::Vector3d(agent.position.x, agent.position.y, rig.height);
  return cam;
}

SegMap render_synthetic_segmap(const World& world, const CameraModel& cam, double label_noise) {
  if (label_noise < 0.0 || label_noise >= 1.0) {
    throw std::invalid_argument("label_noise must lie in [0, 1)");
  }
  SegMap seg;
  seg.width = cam.image_width;
  seg.height = cam.image_height;
  seg.num_classes = static_cast<int>(kSegClassNames.size());
  seg.class_names = kSegClassNames;
  seg.traversable_set = kTraversableClasses;
  seg.probs.assign(static_cast<std::size_t>(seg.width) * seg.height * seg.num_classes, 0.0f);

  const Eigen::Matrix3d k_inv = cam.k.inverse();
  const auto cell_blocked_or_outside = [&](int ix, int iy) {
    if (ix < 0 || iy < 0 || ix >= world.cells_x || iy >= world.cells_y) return true;
    return world.blocked_cell(ix, iy);
  };

  const float leak = static_cast<float>(label_noise / (seg.num_classes - 1));
  const float keep = static_cast<float>(1.0 - label_noise);

  for (int py = 0; py < seg.height; ++py) {
    for (int px = 0; px < seg.width; ++px) {
      int label = kSky;
      const Eigen::Vector3d ray = cam.r * (k_inv * Eigen::Vector3d(px, py, 1.0));
      if (ray.z() < -1e-12) {
        const double s = -cam.t.z() / ray.z();
        const Eigen::Vector3d hit = cam.t + s * ray;
        const Vec2 g{hit.x(), hit.y()};
        if (!world.in_bounds(g)) {
          label = kObstacle;
        } else {
          const int ix = std::min(world.cell_x(g.x), world.cells_x - 1);
          const int iy = std::min(world.cell_y(g.y), world.cells_y - 1);
          if (world.blocked_cell(ix, iy)) {
            label = kObstacle;
          } else {
            bool near_blocked = false;
            for (int dy = -1; dy <= 1 && !near_blocked; ++dy) {
              for (int dx = -1; dx <= 1 && !near_blocked; ++dx) {
                if (dx == 0 && dy == 0) continue;
                near_blocked = cell_blocked_or_outside(ix + dx, iy + dy);
              }
            }
            label = near_blocked ? kSidewalk : kRoad;
          }
        }
      }
      for (int c = 0; c < seg.num_classes; ++c) {
        seg.prob_ref(px, py, c) = (c == label) ? keep : leak;
      }
    }
  }
  return seg;
}

// --- segmap binary format ---

namespace {

constexpr char kSegMagic[8] = {'I', 'N', 'T', 'S', 'E', 'G', '1', '\n'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32(out, bits);
}

float get_f32(const std::string& in, std::size_t& pos) {
  const std::uint32_t bits = get_u32(in, pos);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write file: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw data_error("failed writing file: " + path);
}

}  // namespace

void save_segmap(const SegMap& seg, const std::string& path) {
  std::string out;
  out.append(kSegMagic, sizeof kSegMagic);
  put_u32(out, static_cast<std::uint32_t>(seg.width));
  put_u32(out, static_cast<std::uint32_t>(seg.height));
  put_u32(out, static_cast<std::uint32_t>(seg.num_classes));
  put_u32(out, static_cast<std::uint32_t>(seg.traversable_set.size()));
  for (int c : seg.traversable_set) put_u32(out, static_cast<std::uint32_t>(c));
  for (const std::string& name : seg.class_names) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
  }
  for (float p : seg.probs) put_f32(out, p);
  write_file(path, out);
}

SegMap load_segmap(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < sizeof kSegMagic + 16 || std::memcmp(bytes.data(), kSegMagic, sizeof kSegMagic) != 0) {
    throw data_error("not a segmap file (bad magic): " + path);
  }
  std::size_t pos = sizeof kSegMagic;
  SegMap seg;
  seg.width = static_cast<int>(get_u32(bytes, pos));
  seg.height = static_cast<int>(get_u32(bytes, pos));
  seg.num_classes = static_cast<int>(get_u32(bytes, pos));
  const std::uint32_t n_trav = get_u32(bytes, pos);
  for (std::uint32_t i = 0; i < n_trav; ++i) seg.traversable_set.push_back(static_cast<int>(get_u32(bytes, pos)));
  for (int c = 0; c < seg.num_classes; ++c) {
    if (pos + 4 > bytes.size()) throw data_error("truncated segmap class table: " + path);
    const std::uint32_t len = get_u32(bytes, pos);
    if (pos + len > bytes.size()) throw data_error("truncated segmap class name: " + path);
    seg.class_names.push_back(bytes.substr(pos, len));
    pos += len;
  }
  const std::size_t n = static_cast<std::size_t>(seg.width) * seg.height * seg.num_classes;
  if (pos + n * 4 > bytes.size()) throw data_error("truncated segmap payload: " + path);
  seg.probs.resize(n);
  for (float& p : seg.probs) p = get_f32(bytes, pos);
  seg.validate();
  return seg;
}

void save_camera(const CameraModel& cam, const std::string& path) {
  nlohmann::json pose = nlohmann::json::array();
  for (int row = 0; row < 4; ++row) {
    nlohmann::json r = nlohmann::json::array();
    for (int col = 0; col < 4; ++col) {
      if (row < 3 && col < 3) {
        r.push_back(cam.r(row, col));
      } else if (row < 3) {
        r.push_back(cam.t(row));
      } else {
        r.push_back(col == 3 ? 1.0 : 0.0);
      }
    }
    pose.push_back(r);
  }
  nlohmann::json j{{"fx", cam.k(0, 0)}, {"fy", cam.k(1, 1)}, {"cx", cam.k(0, 2)},
                   {"cy", cam.k(1, 2)}, {"width", cam.image_width}, {"height", cam.image_height},
                   {"pose", pose}};
  write_file(path, j.dump(2) + "\n");
}

CameraModel load_camera(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw data_error("corrupt camera file " + path + ": " + e.what());
  }
  CameraModel cam;
  cam.k = Eigen::Matrix3d::Identity();
  cam.k(0, 0) = j.at("fx").get<double>();
  cam.k(1, 1) = j.at("fy").get<double>();
  cam.k(0, 2) = j.at("cx").get<double>();
  cam.k(1, 2) = j.at("cy").get<double>();
  cam.image_width = j.at("width").get<int>();
  cam.image_height = j.at("height").get<int>();
  const auto& pose = j.at("pose");
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) cam.r(row, col) = pose.at(row).at(col).get<double>();
    cam.t(row) = pose.at(row).at(3).get<double>();
  }
  cam.validate();
  return cam;
}

// --- raster output ---

Raster segmap_background(const SegMap& seg) {
  static const Rgb palette[] = {{95, 95, 100},    // road
                                {165, 160, 150},  // sidewalk
                                {70, 50, 45},     // obstacle
                                {185, 205, 235}}; // sky
  Raster img(seg.width, seg.height);
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      int best = 0;
      for (int c = 1; c < seg.num_classes; ++c) {
        if (seg.prob(x, y, c) > seg.prob(x, y, best)) best = c;
      }
      img.at(x, y) = palette[std::min(best, 3)];
    }
  }
  return img;
}

namespace {

void plot(Raster& img, int x, int y, Rgb color) {
  if (x >= 0 && y >= 0 && x < img.width && y < img.height) img.at(x, y) = color;
}

void plot_thick(Raster& img, int x, int y, const TrajectoryStyle& style) {
  plot(img, x, y, style.color);
  if (style.thickness > 1) {
    plot(img, x + 1, y, style.color);
    plot(img, x - 1, y, style.color);
    plot(img, x, y + 1, style.color);
    plot(img, x, y - 1, style.color);
  }
}

void draw_line(Raster& img, int x0, int y0, int x1, int y1, const TrajectoryStyle& style) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    plot_thick(img, x0, y0, style);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_marker(Raster& img, int x, int y, const TrajectoryStyle& style) {
  plot(img, x, y, style.color);
  plot(img, x + 1, y, style.color);
  plot(img, x - 1, y, style.color);
  plot(img, x, y + 1, style.color);
  plot(img, x, y - 1, style.color);
}

}  // namespace

Raster render_overlay(const Raster& background, const CameraModel& cam,
                      const std::vector<std::pair<Trajectory, TrajectoryStyle>>& items) {
  Raster img = background;
  for (const auto& [traj, style] : items) {
    std::optional<Eigen::Vector2d> prev;
    std::vector<Eigen::Vector2d> visible;
    for (const Vec2& x : traj.positions) {
      const auto pixel = project(cam, x);
      if (pixel.has_value()) {
        visible.push_back(*pixel);
        if (prev.has_value()) {
          draw_line(img, static_cast<int>(std::lround(prev->x())), static_cast<int>(std::lround(prev->y())),
                    static_cast<int>(std::lround(pixel->x())), static_cast<int>(std::lround(pixel->y())),
                    style);
        }
      }
      prev = pixel;
    }
    for (const auto& pixel : visible) {
      draw_marker(img, static_cast<int>(std::lround(pixel.x())), static_cast<int>(std::lround(pixel.y())),
                  style);
    }
  }
  return img;
}

void save_ppm(const Raster& raster, const std::string& path) {
  std::string out = "P6\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) +
                    "\n255\n";
  out.reserve(out.size() + raster.pixels.size() * 3);
  for (const Rgb& p : raster.pixels) {
    out.push_back(static_cast<char>(p.r));
    out.push_back(static_cast<char>(p.g));
    out.push_back(static_cast<char>(p.b));
  }
  write_file(path, out);
}

Raster load_ppm(const std::string& path) {
  const std::string bytes = read_file(path);
  int w = 0, h = 0, maxval = 0, consumed = 0;
  if (std::sscanf(bytes.c_str(), "P6\n%d %d\n%d\n%n", &w, &h, &maxval, &consumed) != 3 ||
      maxval != 255) {
    throw data_error("not a P6 ppm: " + path);
  }
  Raster img(w, h);
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - consumed < need) throw data_error("truncated ppm: " + path);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = {static_cast<std::uint8_t>(bytes[consumed + 3 * i]),
                     static_cast<std::uint8_t>(bytes[consumed + 3 * i + 1]),
                     static_cast<std::uint8_t>(bytes[consumed + 3 * i + 2])};
  }
  return img;
}

}  // namespace intent

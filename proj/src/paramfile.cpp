#include "intent/paramfile.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "intent/errors.hpp"

namespace intent::nn {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'T', 'N', 'N', 'P', '1', '\n'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  put_u64(out, bits);
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
  return v;
}

double get_f64(const std::string& in, std::size_t& pos) {
  const std::uint64_t bits = get_u64(in, pos);
  double d;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open parameter file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

void save_params(const std::string& path,
                 const std::vector<std::pair<std::string, const Tensor2*>>& sections) {
  nlohmann::json header;
  header["sections"] = nlohmann::json::array();
  for (const auto& [name, tensor] : sections) {
    header["sections"].push_back({{"name", name}, {"rows", tensor->rows}, {"cols", tensor->cols}});
  }
  const std::string header_json = header.dump();

  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u64(out, header_json.size());
  out.append(header_json);
  for (const auto& [name, tensor] : sections) {
    for (double v : tensor->data) put_f64(out, v);
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw data_error("cannot write parameter file: " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw data_error("failed writing parameter file: " + path);
}

std::vector<std::pair<std::string, Tensor2>> load_params(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < sizeof kMagic + 12 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw data_error("not a parameter file (bad magic): " + path);
  }
  std::size_t pos = sizeof kMagic;
  const std::uint32_t version = get_u32(bytes, pos);
  if (version != kVersion) {
    throw data_error("unsupported parameter file version " + std::to_string(version) + ": " + path);
  }
  const std::uint64_t header_len = get_u64(bytes, pos);
  if (pos + header_len > bytes.size()) throw data_error("truncated parameter header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw data_error("corrupt parameter header in " + path + ": " + e.what());
  }
  pos += header_len;

  std::vector<std::pair<std::string, Tensor2>> sections;
  for (const auto& s : header.at("sections")) {
    const std::string name = s.at("name").get<std::string>();
    Tensor2 t(s.at("rows").get<int>(), s.at("cols").get<int>());
    if (pos + t.size() * 8 > bytes.size()) {
      throw data_error("truncated parameter payload (section " + name + "): " + path);
    }
    for (double& v : t.data) v = get_f64(bytes, pos);
    sections.emplace_back(name, std::move(t));
  }
  return sections;
}

}  // namespace intent::nn

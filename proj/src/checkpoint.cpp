#include "mazerl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mazerl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {
constexpr char kMagic[9] = "MZRLCKPT";
constexpr uint32_t kVersion = 1;

void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
}  // namespace

void Checkpoint::add(const std::string& name, std::vector<float> data) {
  for (const auto& [n, d] : arrays_)
    if (n == name) throw std::invalid_argument("checkpoint: duplicate array " + name);
  arrays_.emplace_back(name, std::move(data));
}

void Checkpoint::add_tensor(const std::string& name, const Tensor& t) { add(name, t.data); }

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, d] : arrays_)
    if (n == name) return true;
  return false;
}

const std::vector<float>& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, d] : arrays_)
    if (n == name) return d;
  throw std::out_of_range("checkpoint: missing array " + name);
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  for (const auto& [n, d] : arrays_) out.push_back(n);
  return out;
}

void Checkpoint::save(const std::string& path) const {
  nlohmann::json header = meta;
  header["format_version"] = kVersion;
  auto arrays = nlohmann::json::array();
  for (const auto& [name, data] : arrays_)
    arrays.push_back({{"name", name}, {"count", data.size()}});
  header["arrays"] = arrays;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  const std::string header_str = header.dump();
  out.write(kMagic, 8);
  write_u64(out, header_str.size());
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, data] : arrays_)
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const uint64_t header_len = read_u64(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));

  Checkpoint ckpt;
  nlohmann::json header = nlohmann::json::parse(header_str);
  if (header.value("format_version", 0u) != kVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  for (const auto& entry : header["arrays"]) {
    std::vector<float> data(entry["count"].get<size_t>());
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    ckpt.arrays_.emplace_back(entry["name"].get<std::string>(), std::move(data));
  }
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  header.erase("arrays");
  header.erase("format_version");
  ckpt.meta = std::move(header);
  return ckpt;
}

nlohmann::json layer_specs_to_json(const std::vector<LayerSpec>& specs) {
  auto out = nlohmann::json::array();
  for (const LayerSpec& s : specs)
    out.push_back({{"kind", s.kind == LayerKind::Conv2D ? "conv2d" : "dense"},
                   {"out", s.out},
                   {"kh", s.kh},
                   {"kw", s.kw},
                   {"padding", s.padding},
                   {"stride", s.stride},
                   {"activation", s.activation == Activation::LeakyReLU ? "leaky_relu" : "none"}});
  return out;
}

std::vector<LayerSpec> layer_specs_from_json(const nlohmann::json& j) {
  std::vector<LayerSpec> specs;
  for (const auto& e : j) {
    LayerSpec s;
    s.kind = e["kind"] == "conv2d" ? LayerKind::Conv2D : LayerKind::Dense;
    s.out = e["out"];
    s.kh = e["kh"];
    s.kw = e["kw"];
    s.padding = e["padding"];
    s.stride = e["stride"];
    s.activation = e["activation"] == "leaky_relu" ? Activation::LeakyReLU : Activation::None;
    specs.push_back(s);
  }
  return specs;
}

void add_network(Checkpoint& ckpt, const std::string& prefix, Network& net) {
  auto params = net.params();
  for (size_t i = 0; i < params.size(); ++i)
    ckpt.add(prefix + "." + std::to_string(i), params[i]->data);
  ckpt.meta[prefix] = {{"specs", layer_specs_to_json(net.specs())},
                       {"input_shape", net.input_shape()},
                       {"seed", net.seed()}};
}

void load_network(const Checkpoint& ckpt, const std::string& prefix, Network& net) {
  auto params = net.params();
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& data = ckpt.get(prefix + "." + std::to_string(i));
    if (data.size() != params[i]->data.size())
      throw std::runtime_error("checkpoint: shape mismatch loading " + prefix);
    params[i]->data = data;
  }
}

void add_adam(Checkpoint& ckpt, const std::string& prefix, Adam& adam) {
  auto& m = adam.first_moments();
  auto& v = adam.second_moments();
  for (size_t i = 0; i < m.size(); ++i) {
    ckpt.add(prefix + ".m." + std::to_string(i), m[i].data);
    ckpt.add(prefix + ".v." + std::to_string(i), v[i].data);
  }
  ckpt.meta[prefix] = {{"step", adam.step_count()}, {"lr", adam.learning_rate()}};
}

void load_adam(const Checkpoint& ckpt, const std::string& prefix, Adam& adam) {
  auto& m = adam.first_moments();
  auto& v = adam.second_moments();
  for (size_t i = 0; i < m.size(); ++i) {
    m[i].data = ckpt.get(prefix + ".m." + std::to_string(i));
    v[i].data = ckpt.get(prefix + ".v." + std::to_string(i));
  }
  adam.set_step_count(ckpt.meta.at(prefix).at("step").get<int64_t>());
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("hash: cannot open " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

}  // namespace mazerl

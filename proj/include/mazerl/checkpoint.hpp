#ifndef MAZERL_CHECKPOINT_HPP_
#define MAZERL_CHECKPOINT_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "mazerl/nn.hpp"
#include "mazerl/tensor.hpp"

namespace mazerl {

// Checkpoint container: a JSON manifest header followed by named
// little-endian 32-bit float arrays in declaration order.
class Checkpoint {
 public:
  nlohmann::json meta;

  void add(const std::string& name, std::vector<float> data);
  void add_tensor(const std::string& name, const Tensor& t);
  bool has(const std::string& name) const;
  const std::vector<float>& get(const std::string& name) const;
  std::vector<std::string> names() const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::vector<float>>> arrays_;
};

nlohmann::json layer_specs_to_json(const std::vector<LayerSpec>& specs);
std::vector<LayerSpec> layer_specs_from_json(const nlohmann::json& j);

// Network weights under a name prefix ("prefix.0.w", "prefix.0.b", ...).
void add_network(Checkpoint& ckpt, const std::string& prefix, Network& net);
void load_network(const Checkpoint& ckpt, const std::string& prefix, Network& net);

// Adam moments and step counter under a prefix.
void add_adam(Checkpoint& ckpt, const std::string& prefix, Adam& adam);
void load_adam(const Checkpoint& ckpt, const std::string& prefix, Adam& adam);

// FNV-1a content hash of a file, hex-encoded; used by run manifests.
std::string file_hash_hex(const std::string& path);

}  // namespace mazerl

#endif  // MAZERL_CHECKPOINT_HPP_

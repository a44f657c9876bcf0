#include "mazerl/policy.hpp"

#include "mazerl/checkpoint.hpp"
#include "mazerl/ppo.hpp"

namespace mazerl {

std::unique_ptr<PolicyNet> make_policy_from_checkpoint(const std::string& path) {
  Checkpoint ckpt = Checkpoint::load(path);
  const auto& meta = ckpt.meta.at("policy");
  PolicyArch arch;
  arch.conv1 = meta.at("arch").at("conv1").get<int>();
  arch.conv2 = meta.at("arch").at("conv2").get<int>();
  arch.conv3 = meta.at("arch").at("conv3").get<int>();
  arch.dense = meta.at("arch").at("dense").get<int>();
  auto policy = std::make_unique<PolicyNet>(meta.at("canvas").get<int>(),
                                            meta.at("seed").get<uint64_t>(), arch);
  auto params = policy->params();
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& data = ckpt.get("policy." + std::to_string(i));
    if (data.size() != params[i]->data.size())
      throw std::runtime_error("checkpoint: policy shape mismatch");
    params[i]->data = data;
  }
  return policy;
}

}  // namespace mazerl

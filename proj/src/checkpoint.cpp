#include "vrec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace vrec {
namespace {

using nlohmann::json;

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

void append_le64(std::string& out, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double read_le64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

json model_json(const ModelConfig& c) {
  return {{"n_items", c.n_items},   {"d_model", c.d_model},
          {"layers", c.layers},     {"heads", c.heads},
          {"max_positions", c.max_positions}, {"reasoning_steps", c.reasoning_steps},
          {"seed", c.seed}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig c;
  c.n_items = j.at("n_items").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.reasoning_steps = j.at("reasoning_steps").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json verifiers_json(const VerifierBank& bank) {
  const auto& c = bank.config();
  json list = json::array();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& v = bank.verifier(i);
    json layers = json::array();
    for (const auto& l : v.hidden) layers.push_back(l.weight.shape());
    layers.push_back(v.last.weight.shape());
    list.push_back({{"name", v.name}, {"d_i", v.num_classes}, {"layers", layers}});
  }
  return {{"n", bank.size()},
          {"d_model", c.d_model},
          {"hidden_layers", c.hidden_layers},
          {"hidden_width", c.hidden_width},
          {"epsilon", c.epsilon},
          {"use_router", c.use_router},
          {"seed", c.seed},
          {"verifiers", list}};
}

VerifierBankConfig bank_from_json(const json& j) {
  VerifierBankConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.hidden_layers = j.at("hidden_layers").get<int>();
  c.hidden_width = j.at("hidden_width").get<int>();
  c.epsilon = j.at("epsilon").get<double>();
  c.use_router = j.at("use_router").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& v : j.at("verifiers")) {
    c.verifiers.push_back({v.at("name").get<std::string>(), v.at("d_i").get<int>()});
  }
  if (j.at("n").get<std::size_t>() != c.verifiers.size()) {
    throw std::runtime_error("checkpoint: verifier count mismatch");
  }
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Backbone* backbone,
                     const VerifierBank* bank) {
  json header;
  json params = json::array();
  std::string blob;
  auto add = [&](const std::string& prefix, const std::vector<NamedTensor>& named) {
    for (const auto& p : named) {
      params.push_back({{"name", prefix + p.name}, {"shape", p.value.shape()}, {"offset", blob.size()}});
      for (double v : p.value.data()) append_le64(blob, v);
    }
  };
  if (backbone) {
    header["model"] = model_json(backbone->config());
    add("backbone.", backbone->named_parameters());
  }
  if (bank) {
    header["verifiers"] = verifiers_json(*bank);
    add("bank.", bank->named_parameters());
  }
  header["params"] = params;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, static_cast<std::streamsize>(kMagicLen));
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((len >> (8 * i)) & 0xFF));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kMagicLen + 4 || bytes.compare(0, kMagicLen, kCheckpointMagic) != 0) {
    throw std::runtime_error(path.string() + ": not a VRECCKPT1 checkpoint");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(raw[kMagicLen + i]) << (8 * i);
  const std::size_t header_begin = kMagicLen + 4;
  if (header_begin + len > bytes.size()) throw std::runtime_error(path.string() + ": truncated header");
  const json header = json::parse(bytes.substr(header_begin, len));
  const std::size_t blob_begin = header_begin + len;

  Checkpoint ckpt;
  if (header.contains("model")) ckpt.backbone.emplace(model_from_json(header["model"]));
  if (header.contains("verifiers")) ckpt.bank.emplace(bank_from_json(header["verifiers"]));

  std::map<std::string, Tensor> targets;
  if (ckpt.backbone)
    for (auto& p : ckpt.backbone->named_parameters()) targets.emplace("backbone." + p.name, p.value);
  if (ckpt.bank)
    for (auto& p : ckpt.bank->named_parameters()) targets.emplace("bank." + p.name, p.value);

  std::size_t loaded = 0;
  for (const auto& entry : header.at("params")) {
    const auto name = entry.at("name").get<std::string>();
    auto it = targets.find(name);
    if (it == targets.end()) throw std::runtime_error(path.string() + ": unexpected parameter " + name);
    const auto shape = entry.at("shape").get<Shape>();
    if (shape != it->second.shape()) {
      throw std::runtime_error(path.string() + ": parameter " + name + " has shape " +
                               shape_str(shape) + ", model expects " +
                               shape_str(it->second.shape()));
    }
    const auto offset = entry.at("offset").get<std::size_t>();
    auto dst = it->second.mutable_data();
    if (blob_begin + offset + dst.size() * 8 > bytes.size()) {
      throw std::runtime_error(path.string() + ": truncated blob for " + name);
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = read_le64(raw + blob_begin + offset + 8 * i);
    ++loaded;
  }
  if (loaded != targets.size()) throw std::runtime_error(path.string() + ": missing parameters");
  return ckpt;
}

}  // namespace vrec

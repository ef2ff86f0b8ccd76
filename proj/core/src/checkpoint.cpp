#include "pmn/checkpoint.hpp"

#include <cstring>

#include <json.hpp>

#include "pmn/io.hpp"

namespace pmn {

namespace {

template <typename T>
void put_tensor(io::ByteWriter& w, const std::string& name, const Tensor<T>& t) {
  w.string16(name);
  if (t.rank() > 0xFFFF) throw DataError("checkpoint: rank too large for " + name);
  w.u16(static_cast<std::uint16_t>(t.rank()));
  for (auto d : t.shape()) w.u32(io::checked_u32(d, "tensor dimension"));
  for (auto v : t.values()) w.f32(static_cast<float>(v));
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, PmnModel<T>& model, const RunConfig& config,
                     std::size_t epoch, const nn::Adam<T>* adam) {
  nlohmann::ordered_json header{{"format", "pmn-checkpoint"},
                                {"classes", model.classes()},
                                {"epoch", epoch},
                                {"adam_steps", adam ? adam->steps() : 0},
                                {"config", nlohmann::ordered_json::parse(to_json(config))}};
  const std::string text = header.dump();
  io::ByteWriter w;
  w.bytes("PMN1", 4);
  w.u16(kCheckpointVersion);
  w.u32(io::checked_u32(text.size(), "header"));
  w.bytes(text.data(), text.size());
  for (const auto& p : model.params()) put_tensor(w, p.name, *p.value);
  for (const auto& b : model.buffers()) put_tensor(w, b.name, *b.value);
  if (adam) {
    const auto& a = *adam;
    for (std::size_t i = 0; i < a.params().size(); ++i) {
      put_tensor(w, "adam.m." + a.params()[i].name, a.first_moments()[i]);
      put_tensor(w, "adam.v." + a.params()[i].name, a.second_moments()[i]);
    }
  }
  io::write_file(path, w.buffer());
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  const auto buf = io::read_file(path);
  const std::string origin = path.string();
  io::ByteReader r(buf, origin);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "PMN1", 4) != 0) throw DataError(origin + ": not a PMN checkpoint");
  const auto version = r.u16();
  if (version != kCheckpointVersion) {
    throw VersionError(origin + ": checkpoint version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const std::string text = r.string(r.u32());
  CheckpointFile f;
  try {
    const auto j = nlohmann::json::parse(text);
    f.header.classes = j.at("classes").get<std::size_t>();
    f.header.epoch = j.at("epoch").get<std::size_t>();
    f.header.adam_steps = j.at("adam_steps").get<std::uint64_t>();
    f.header.config = run_config_from_json(j.at("config").dump());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": malformed checkpoint header: " + e.what());
  }
  while (!r.done()) {
    std::string name = r.string16();
    const std::size_t rank = r.u16();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    const std::size_t count = shape_product(shape);
    if (r.remaining() < count * 4) throw DataError(origin + ": truncated tensor " + name);
    std::vector<float> data(count);
    for (auto& v : data) v = r.f32();
    if (!f.tensors.emplace(name, Tensor<float>(shape, std::move(data))).second) {
      throw DataError(origin + ": duplicate tensor " + name);
    }
  }
  return f;
}

template <typename T>
LoadedModel<T> model_from_checkpoint(const CheckpointFile& file, const std::string& origin) {
  LoadedModel<T> out{file.header, PmnModel<T>(file.header.config.model_config(file.header.classes))};
  std::size_t used = 0;
  auto fill = [&](const std::string& name, Tensor<T>& target) {
    const auto it = file.tensors.find(name);
    if (it == file.tensors.end()) throw VersionError(origin + ": checkpoint lacks tensor '" + name + "' required by its config");
    if (it->second.shape() != target.shape()) {
      throw VersionError(origin + ": tensor '" + name + "' has shape " + shape_to_string(it->second.shape()) +
                         ", config expects " + shape_to_string(target.shape()));
    }
    target = it->second.template cast<T>();
    ++used;
  };
  for (auto& p : out.model.params()) fill(p.name, *p.value);
  for (auto& b : out.model.buffers()) fill(b.name, *b.value);
  for (const auto& [name, t] : file.tensors) {
    if (name.rfind("adam.", 0) == 0) ++used;
  }
  if (used != file.tensors.size()) throw VersionError(origin + ": checkpoint holds tensors unknown to its config");
  return out;
}

template <typename T>
LoadedModel<T> load_checkpoint(const std::filesystem::path& path) {
  return model_from_checkpoint<T>(read_checkpoint(path), path.string());
}

template <typename T>
void restore_adam(const CheckpointFile& file, nn::Adam<T>& adam) {
  for (std::size_t i = 0; i < adam.params().size(); ++i) {
    const auto& name = adam.params()[i].name;
    const auto m = file.tensors.find("adam.m." + name);
    const auto v = file.tensors.find("adam.v." + name);
    if (m == file.tensors.end() || v == file.tensors.end()) throw VersionError("checkpoint lacks Adam state for " + name);
    if (m->second.shape() != adam.first_moments()[i].shape()) throw VersionError("Adam state shape mismatch for " + name);
    adam.first_moments()[i] = m->second.template cast<T>();
    adam.second_moments()[i] = v->second.template cast<T>();
  }
  adam.set_steps(file.header.adam_steps);
}

#define PMN_INSTANTIATE(T)                                                                                         \
  template void save_checkpoint<T>(const std::filesystem::path&, PmnModel<T>&, const RunConfig&, std::size_t,     \
                                   const nn::Adam<T>*);                                                            \
  template LoadedModel<T> load_checkpoint<T>(const std::filesystem::path&);                                        \
  template LoadedModel<T> model_from_checkpoint<T>(const CheckpointFile&, const std::string&);                     \
  template void restore_adam<T>(const CheckpointFile&, nn::Adam<T>&);

PMN_INSTANTIATE(float)
PMN_INSTANTIATE(double)

}  // namespace pmn

#pragma once

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cin/adam.hpp"
#include "cin/image_io.hpp"  // IoError
#include "cin/model.hpp"

namespace cin {

// Container layout (little-endian throughout):
//   bytes 0..3    magic "CINW"
//   bytes 4..7    u32 format version (currently 1)
//   bytes 8..15   u64 JSON header length N
//   bytes 16..16+N-1   UTF-8 JSON header
//   then           raw float32 blobs, offsets relative to the blob region
// The header carries the architecture hyperparameters, stage metadata, and a
// tensor directory {name, shape, offset, count}; optimizer state rides along
// as additional directory entries under "optimizer".
inline constexpr char kCheckpointMagic[4] = {'C', 'I', 'N', 'W'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"image_size", c.image_size},
                     {"msg_len", c.msg_len},
                     {"msg_hidden", c.msg_hidden},
                     {"dem_width", c.dem_width},
                     {"inn_layers", c.inn_layers},
                     {"inn_growth", c.inn_growth},
                     {"exp_alpha", c.exp_alpha},
                     {"strength", c.strength},
                     {"jpeg_keep_luma", c.jpeg_keep_luma},
                     {"jpeg_keep_chroma", c.jpeg_keep_chroma},
                     {"niam_stem", c.niam_stem},
                     {"niam_se_blocks", c.niam_se_blocks},
                     {"niam_reduction", c.niam_reduction},
                     {"niam_down", c.niam_down},
                     {"nsm_widths", c.nsm_widths}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.msg_len = j.value("msg_len", d.msg_len);
  c.msg_hidden = j.value("msg_hidden", d.msg_hidden);
  c.dem_width = j.value("dem_width", d.dem_width);
  c.inn_layers = j.value("inn_layers", d.inn_layers);
  c.inn_growth = j.value("inn_growth", d.inn_growth);
  c.exp_alpha = j.value("exp_alpha", d.exp_alpha);
  c.strength = j.value("strength", d.strength);
  c.jpeg_keep_luma = j.value("jpeg_keep_luma", d.jpeg_keep_luma);
  c.jpeg_keep_chroma = j.value("jpeg_keep_chroma", d.jpeg_keep_chroma);
  c.niam_stem = j.value("niam_stem", d.niam_stem);
  c.niam_se_blocks = j.value("niam_se_blocks", d.niam_se_blocks);
  c.niam_reduction = j.value("niam_reduction", d.niam_reduction);
  c.niam_down = j.value("niam_down", d.niam_down);
  c.nsm_widths = j.value("nsm_widths", d.nsm_widths);
}

struct CheckpointTensor {
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  ModelConfig config;
  std::string stage;
  std::int64_t step = 0;
  std::map<std::string, CheckpointTensor> tensors;
  // Optimizer state: per-group Adam step counters plus moment tensors keyed
  // "<param>.m" / "<param>.v".
  bool has_optimizer = false;
  std::map<std::string, std::int64_t> adam_steps;
  std::map<std::string, CheckpointTensor> opt_tensors;
};

namespace detail {

inline void append_tensor_entry(nlohmann::json& dir, const std::string& name,
                                const Shape& shape, std::uint64_t offset,
                                std::uint64_t count) {
  dir.push_back({{"name", name},
                 {"shape", std::vector<std::int64_t>(shape.begin(), shape.end())},
                 {"offset", offset},
                 {"count", count}});
}

}  // namespace detail

// Optimizer groups to persist alongside parameters, keyed by group name.
using AdamGroups = std::vector<std::pair<std::string, const Adam<float>*>>;

inline void save_checkpoint(const std::string& path, const CinModel<float>& model,
                            const std::string& stage, std::int64_t step,
                            const AdamGroups& opts = {}) {
  nlohmann::json header;
  header["config"] = model.config();
  header["stage"] = stage;
  header["step"] = step;

  std::vector<std::pair<std::string, const ArrayX<float>*>> blobs;
  std::uint64_t offset = 0;
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& p : model.all_params()) {
    detail::append_tensor_entry(dir, p.name(), p.shape(), offset, p.size());
    blobs.push_back({p.name(), &p.array()});
    offset += static_cast<std::uint64_t>(p.size()) * sizeof(float);
  }
  header["tensors"] = dir;

  std::vector<std::pair<std::uint64_t, std::vector<float>>> opt_blobs;
  if (!opts.empty()) {
    nlohmann::json optj;
    nlohmann::json groups = nlohmann::json::object();
    nlohmann::json odir = nlohmann::json::array();
    for (const auto& [gname, o] : opts) {
      groups[gname] = o->step_count();
      const auto& ps = o->params();
      const auto& sts = o->states();
      for (size_t i = 0; i < ps.size(); ++i) {
        for (const char* kind : {"m", "v"}) {
          const ArrayX<float>& src = kind[0] == 'm' ? sts[i].m : sts[i].v;
          detail::append_tensor_entry(odir, ps[i].name() + "." + kind,
                                      ps[i].shape(), offset, src.size());
          opt_blobs.push_back(
              {offset, std::vector<float>(src.data(), src.data() + src.size())});
          offset += static_cast<std::uint64_t>(src.size()) * sizeof(float);
        }
      }
    }
    optj["adam_steps"] = groups;
    optj["tensors"] = odir;
    header["optimizer"] = optj;
  }

  const std::string hs = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_checkpoint: cannot open '" + path + "'");
  f.write(kCheckpointMagic, 4);
  const std::uint32_t ver = kCheckpointVersion;
  f.write(reinterpret_cast<const char*>(&ver), 4);
  const std::uint64_t hlen = hs.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, arr] : blobs)
    f.write(reinterpret_cast<const char*>(arr->data()),
            static_cast<std::streamsize>(arr->size() * sizeof(float)));
  for (const auto& [off, data] : opt_blobs)
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!f) throw IoError("save_checkpoint: write failed on '" + path + "'");
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_checkpoint: cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw IoError("read_checkpoint: '" + path + "' is not a model file");
  std::uint32_t ver = 0;
  f.read(reinterpret_cast<char*>(&ver), 4);
  if (ver != kCheckpointVersion)
    throw IoError("read_checkpoint: unsupported format version " +
                  std::to_string(ver));
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw IoError("read_checkpoint: truncated header in '" + path + "'");
  nlohmann::json header = nlohmann::json::parse(hs);

  Checkpoint ck;
  ck.config = header.at("config").get<ModelConfig>();
  ck.stage = header.value("stage", "");
  ck.step = header.value("step", 0);

  const std::streampos blob_start = f.tellg();
  auto read_dir = [&](const nlohmann::json& dir,
                      std::map<std::string, CheckpointTensor>& out) {
    for (const auto& e : dir) {
      CheckpointTensor t;
      for (std::int64_t d : e.at("shape").get<std::vector<std::int64_t>>())
        t.shape.push_back(d);
      const std::uint64_t count = e.at("count").get<std::uint64_t>();
      const std::uint64_t off = e.at("offset").get<std::uint64_t>();
      t.data.resize(count);
      f.seekg(blob_start + static_cast<std::streamoff>(off));
      f.read(reinterpret_cast<char*>(t.data.data()),
             static_cast<std::streamsize>(count * sizeof(float)));
      if (!f)
        throw IoError("read_checkpoint: truncated tensor '" +
                      e.at("name").get<std::string>() + "'");
      out[e.at("name").get<std::string>()] = std::move(t);
    }
  };
  read_dir(header.at("tensors"), ck.tensors);
  if (header.contains("optimizer")) {
    ck.has_optimizer = true;
    for (const auto& [k, v] : header["optimizer"]["adam_steps"].items())
      ck.adam_steps[k] = v.get<std::int64_t>();
    read_dir(header["optimizer"]["tensors"], ck.opt_tensors);
  }
  return ck;
}

// Rebuild a model from a checkpoint; every parameter must be present with a
// matching shape so the loaded forward pass is bitwise the saved one.
inline CinModel<float> load_model(const Checkpoint& ck) {
  Rng rng(0);
  CinModel<float> model(ck.config, rng);
  for (auto& p : model.all_params()) {
    auto it = ck.tensors.find(p.name());
    require(it != ck.tensors.end(),
            "load_model: checkpoint is missing parameter '" + p.name() + "'");
    require(it->second.shape == p.shape(),
            "load_model: shape mismatch for '" + p.name() + "': file has " +
                shape_str(it->second.shape) + ", model expects " +
                shape_str(p.shape()));
    for (Index i = 0; i < p.size(); ++i)
      p.mutable_array()[i] = it->second.data[static_cast<size_t>(i)];
  }
  return model;
}

inline CinModel<float> load_model(const std::string& path) {
  return load_model(read_checkpoint(path));
}

// Restore Adam moments saved next to the parameters; silently skips
// parameters without saved state (fresh moments).
inline void restore_optimizer(const Checkpoint& ck, const std::string& group,
                              Adam<float>& opt) {
  if (!ck.has_optimizer) return;
  auto g = ck.adam_steps.find(group);
  if (g != ck.adam_steps.end()) opt.set_step_count(g->second);
  auto& sts = opt.states();
  const auto& ps = opt.params();
  for (size_t i = 0; i < ps.size(); ++i) {
    auto m = ck.opt_tensors.find(ps[i].name() + ".m");
    auto v = ck.opt_tensors.find(ps[i].name() + ".v");
    if (m == ck.opt_tensors.end() || v == ck.opt_tensors.end()) continue;
    for (Index k = 0; k < ps[i].size(); ++k) {
      sts[i].m[k] = m->second.data[static_cast<size_t>(k)];
      sts[i].v[k] = v->second.data[static_cast<size_t>(k)];
    }
  }
}

}  // namespace cin

#pragma once

#include <json.hpp>

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cin/model.hpp"
#include "cin/noise.hpp"

namespace cin {

// Total-loss coefficients for the three terms: watermarked-image fidelity,
// restored-watermark fidelity, restored-image fidelity.
struct LossWeights {
  double wim = 1.0;
  double rwm = 0.001;
  double rim = 1.0;
};

// Per-stage presets. The noise-free stage also trains the restored image;
// the noise stages drop that term and raise the watermark weight.
inline LossWeights stage_weights(const std::string& stage) {
  if (stage == "noise_free") return {1.0, 0.001, 1.0};
  if (stage == "specific") return {1.0, 0.01, 0.0};
  if (stage == "combined") return {1.0, 1.0, 0.0};
  throw ValueError("unknown training stage '" + stage +
                   "' (expected noise_free, specific, combined)");
}

// Loss weights for the parallel decoder heads in the combined stage.
inline constexpr double kNiamLossWeight = 1.0;
inline constexpr double kNsmLossWeight = 0.1;

struct TrainConfig {
  ModelConfig model;
  std::string stage = "noise_free";
  std::string pool;              // named pool, or empty when specs are given
  std::vector<NoiseSpec> specs;  // explicit attack list
  int batch = 32;
  std::int64_t steps = 1000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string data_dir;
  std::string warm_start;
  std::string out = "model.cinw";
  int eval_every = 250;
  int eval_images = 16;
  // Early stopping (0 disables). noise_free: stop once the train-subset
  // accuracy and PSNR both clear the targets. combined: stop once the
  // compression decoder leads the invertible decoder under real JPEG by
  // target_gap points with accuracy at least target_acc.
  double target_acc = 0.0;
  double target_psnr = 0.0;
  double target_gap = 0.0;
  std::string history_csv;

  NoisePool resolve_pool() const {
    if (!specs.empty()) {
      NoisePool p;
      p.name = "custom";
      p.specs = specs;
      for (const auto& s : p.specs) validate_spec(s);
      return p;
    }
    if (stage == "noise_free") return pool_by_name("identity");
    require(!pool.empty(), "config: noise stages need a pool or explicit specs");
    return pool_by_name(pool);
  }

  void validate() const {
    stage_weights(stage);  // throws on a bad stage name
    require(batch >= 1, "config: batch must be >= 1");
    require(steps >= 1, "config: steps must be >= 1");
    require(lr > 0, "config: lr must be positive");
    require(!data_dir.empty(), "config: data_dir is required");
    if (stage != "noise_free")
      require(!warm_start.empty(),
              "config: stage '" + stage + "' needs a warm_start checkpoint");
    resolve_pool();
  }
};

namespace detail {

inline std::vector<NoiseSpec> parse_spec_list(const std::string& text) {
  std::vector<NoiseSpec> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    NoiseSpec spec;
    std::string name = colon == std::string::npos ? item : item.substr(0, colon);
    require(parse_noise_kind(name, spec.kind),
            "config: unknown noise '" + name + "'");
    spec.factor = colon == std::string::npos
                      ? default_factor(spec.kind)
                      : std::stod(item.substr(colon + 1));
    validate_spec(spec);
    out.push_back(spec);
  }
  return out;
}

inline std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

inline void apply_kv(TrainConfig& c, const std::string& key,
                     const std::string& val) {
  auto& m = c.model;
  if (key == "image_size") m.image_size = std::stoi(val);
  else if (key == "msg_len") m.msg_len = std::stoi(val);
  else if (key == "msg_hidden") m.msg_hidden = std::stoi(val);
  else if (key == "dem_width") m.dem_width = std::stoi(val);
  else if (key == "inn_layers") m.inn_layers = std::stoi(val);
  else if (key == "inn_growth") m.inn_growth = std::stoi(val);
  else if (key == "exp_alpha") m.exp_alpha = std::stof(val);
  else if (key == "strength") m.strength = std::stof(val);
  else if (key == "jpeg_keep_luma") m.jpeg_keep_luma = std::stoi(val);
  else if (key == "jpeg_keep_chroma") m.jpeg_keep_chroma = std::stoi(val);
  else if (key == "niam_stem") m.niam_stem = std::stoi(val);
  else if (key == "niam_se_blocks") m.niam_se_blocks = std::stoi(val);
  else if (key == "niam_reduction") m.niam_reduction = std::stoi(val);
  else if (key == "niam_down") m.niam_down = parse_int_list(val);
  else if (key == "nsm_widths") m.nsm_widths = parse_int_list(val);
  else if (key == "stage") c.stage = val;
  else if (key == "pool") c.pool = val;
  else if (key == "specs") c.specs = parse_spec_list(val);
  else if (key == "batch") c.batch = std::stoi(val);
  else if (key == "steps") c.steps = std::stoll(val);
  else if (key == "lr") c.lr = std::stod(val);
  else if (key == "seed") c.seed = std::stoull(val);
  else if (key == "data_dir") c.data_dir = val;
  else if (key == "warm_start") c.warm_start = val;
  else if (key == "out") c.out = val;
  else if (key == "eval_every") c.eval_every = std::stoi(val);
  else if (key == "eval_images") c.eval_images = std::stoi(val);
  else if (key == "target_acc") c.target_acc = std::stod(val);
  else if (key == "target_psnr") c.target_psnr = std::stod(val);
  else if (key == "target_gap") c.target_gap = std::stod(val);
  else if (key == "history_csv") c.history_csv = val;
  else throw ValueError("config: unknown key '" + key + "'");
}

}  // namespace detail

// Accepts a JSON object or flat "key = value" lines ('#' comments). Both
// formats use the same key names.
inline TrainConfig parse_train_config(const std::string& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), "config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  const std::string text = buf.str();

  TrainConfig c;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j = nlohmann::json::parse(text);
    for (const auto& [key, val] : j.items()) {
      if (val.is_string())
        detail::apply_kv(c, key, val.get<std::string>());
      else if (val.is_array()) {
        std::string list;
        for (const auto& e : val) {
          if (!list.empty()) list += ',';
          if (e.is_string())
            list += e.get<std::string>();
          else {
            std::ostringstream os;
            os << e;
            list += os.str();
          }
        }
        detail::apply_kv(c, key, list);
      } else {
        std::ostringstream os;
        os << val;
        detail::apply_kv(c, key, os.str());
      }
    }
  } else {
    std::stringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (!key.empty()) detail::apply_kv(c, key, val);
    }
  }
  return c;
}

inline void print_config(const TrainConfig& c, std::ostream& os) {
  const auto& m = c.model;
  os << "config:\n"
     << "  stage        " << c.stage << "\n"
     << "  pool         " << (c.specs.empty() ? (c.pool.empty() ? "identity" : c.pool)
                                              : "custom") << "\n"
     << "  image_size   " << m.image_size << "\n"
     << "  msg_len      " << m.msg_len << "\n"
     << "  inn          " << m.inn_layers << " layers, growth " << m.inn_growth
     << "\n"
     << "  dem_width    " << m.dem_width << "\n"
     << "  strength     " << m.strength << "\n"
     << "  batch        " << c.batch << "\n"
     << "  steps        " << c.steps << "\n"
     << "  lr           " << c.lr << "\n"
     << "  seed         " << c.seed << "\n"
     << "  data_dir     " << c.data_dir << "\n"
     << "  warm_start   " << (c.warm_start.empty() ? "-" : c.warm_start) << "\n"
     << "  out          " << c.out << "\n";
}

}  // namespace cin

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "cin/checkpoint.hpp"
#include "cin/messages.hpp"
#include "cin/trainer.hpp"

namespace {

using namespace cin;

int run_train(const std::string& config_path, std::uint64_t seed_override,
              bool has_seed, const std::string& out_override) {
  TrainConfig cfg = parse_train_config(config_path);
  if (has_seed) cfg.seed = seed_override;
  if (!out_override.empty()) cfg.out = out_override;
  cfg.validate();
  print_config(cfg, std::cout);

  Trainer trainer(cfg);
  TrainResult res = trainer.run(&std::cout);
  std::cout << "finished after " << res.steps_run << " steps"
            << (res.early_stopped ? " (targets reached)" : "") << "\n";
  if (!res.checkpoint_path.empty())
    std::cout << "checkpoint: " << res.checkpoint_path << "\n";
  return 0;
}

int run_embed(const std::string& model_path, const std::string& image_path,
              const std::string& message, double strength, bool has_strength,
              const std::string& out_path) {
  CinModel<float> model = load_model(model_path);
  model.freeze();
  const float s = has_strength ? static_cast<float>(strength)
                               : model.config().strength;
  std::cout << "embed: model=" << model_path << " image=" << image_path
            << " strength=" << s << " L=" << model.config().msg_len << "\n";

  TensorF cover = Dataset::standardize(image_to_tensor(read_image(image_path)),
                                       model.config().image_size);
  BitMessage bits = parse_message(message, model.config().msg_len);
  auto emb = model.embed(cover, message_to_tensor(bits), s);
  write_png(out_path, tensor_to_image(emb.watermarked));
  std::cout << "message: " << message_to_binary(bits) << " (hex "
            << message_to_hex(bits) << ")\n"
            << "psnr: " << psnr(cover, emb.watermarked) << " dB\n"
            << "wrote " << out_path << "\n";
  return 0;
}

int run_extract(const std::string& model_path, const std::string& image_path) {
  CinModel<float> model = load_model(model_path);
  model.freeze();
  std::cout << "extract: model=" << model_path << " image=" << image_path
            << "\n";
  TensorF img = image_to_tensor(read_image(image_path));
  require(img.dim(2) == model.config().image_size &&
              img.dim(3) == model.config().image_size,
          "image extents " + std::to_string(img.dim(2)) + "x" +
              std::to_string(img.dim(3)) + " do not match the model's " +
              std::to_string(model.config().image_size));

  BitMessage wm_im = threshold_bits(model.decode_im(img).logits);
  BitMessage wm_niam = threshold_bits(model.decode_niam(img));
  const double p = model.nsm_prob(img)[0];
  BitMessage routed = nsm_select(p, wm_im, wm_niam);
  const bool used_niam = p >= 0.5;

  std::cout << "route: " << (used_niam ? "niam" : "im")
            << " (jpeg probability " << p << ")\n"
            << "bits: " << message_to_binary(routed) << "\n"
            << "hex:  " << message_to_hex(routed) << "\n";
  return 0;
}

int run_attack(const std::string& image_path, const std::string& noise,
               double factor, bool has_factor, const std::string& cover_path,
               std::uint64_t seed, const std::string& out_path) {
  NoiseSpec spec;
  require(parse_noise_kind(noise, spec.kind), "unknown noise '" + noise + "'");
  spec.factor = has_factor ? factor : default_factor(spec.kind);
  validate_spec(spec);
  std::cout << "attack: " << noise_name(spec.kind) << " factor=" << spec.factor
            << " seed=" << seed << "\n";

  TensorF img = image_to_tensor(read_image(image_path));
  TensorF cover = cover_path.empty()
                      ? img
                      : image_to_tensor(read_image(cover_path));
  require(cover.shape() == img.shape(),
          "cover extents must match the attacked image");
  Rng rng(seed);
  TensorF out = apply_noise(spec, img, cover, rng);
  write_png(out_path, tensor_to_image(out));
  std::cout << "psnr(in, out): " << psnr(img, out) << " dB\n"
            << "wrote " << out_path << "\n";
  return 0;
}

int run_eval(const std::string& model_path, const std::string& data_dir,
             const std::string& pool_name, const std::string& strengths,
             const std::string& out_prefix, std::uint64_t seed) {
  CinModel<float> model = load_model(model_path);
  model.freeze();
  Dataset ds = Dataset::load(data_dir, model.config().image_size);
  std::cout << "eval: model=" << model_path << " images=" << ds.count()
            << " pool=" << pool_name << " seed=" << seed << "\n";

  if (!strengths.empty()) {
    std::vector<double> ss;
    std::stringstream s(strengths);
    std::string item;
    while (std::getline(s, item, ',')) ss.push_back(std::stod(item));
    auto rows = strength_sweep(model, ds, ss, seed);
    std::cout << "strength  psnr_db  ssim  ber_pct\n";
    std::ostringstream csv;
    csv << "strength,psnr_db,ssim,ber_pct\n";
    for (const auto& r : rows) {
      std::cout << r.strength << "  " << r.psnr_db << "  " << r.ssim_val
                << "  " << r.ber_pct << "\n";
      csv << r.strength << ',' << r.psnr_db << ',' << r.ssim_val << ','
          << r.ber_pct << '\n';
    }
    if (!out_prefix.empty()) {
      std::ofstream f(out_prefix + "_sweep.csv");
      f << csv.str();
      std::cout << "wrote " << out_prefix << "_sweep.csv\n";
    }
    return 0;
  }

  NoisePool pool = pool_by_name(pool_name);
  EvalResult res =
      evaluate_model(model, ds, pool, seed, model.config().strength);
  res.report.write_table(std::cout);
  if (!out_prefix.empty()) {
    std::ofstream csv(out_prefix + ".csv");
    res.report.write_csv(csv);
    std::ofstream txt(out_prefix + ".txt");
    res.report.write_table(txt);
    std::cout << "wrote " << out_prefix << ".csv and " << out_prefix
              << ".txt\n";
  }
  return 0;
}

int run_inspect(const std::string& model_path) {
  Checkpoint ck = read_checkpoint(model_path);
  std::cout << "model file: " << model_path << "\n"
            << "stage: " << ck.stage << "  step: " << ck.step << "\n"
            << "image_size: " << ck.config.image_size
            << "  msg_len: " << ck.config.msg_len
            << "  strength: " << ck.config.strength << "\n"
            << "inn: " << ck.config.inn_layers << " layers, growth "
            << ck.config.inn_growth << "\n"
            << "dem_width: " << ck.config.dem_width << "  msg_hidden: "
            << ck.config.msg_hidden << "\n"
            << "niam: stem " << ck.config.niam_stem << ", "
            << ck.config.niam_se_blocks << " se blocks\n";
  std::int64_t total = 0;
  for (const auto& [name, t] : ck.tensors) total += t.data.size();
  std::cout << "tensors: " << ck.tensors.size() << " (" << total
            << " parameters)\n"
            << "optimizer state: " << (ck.has_optimizer ? "yes" : "no") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CIN watermarking: embed, extract, attack, evaluate, train"};
  app.require_subcommand(1);

  std::string config, model, image, cover, message, noise, pool = "n_pool";
  std::string out, strengths;
  double strength = 1.0, factor = 0.0;
  std::uint64_t seed = 0;

  auto* ctrain = app.add_subcommand("train", "run one training stage");
  ctrain->add_option("--config", config, "JSON or key=value run config")
      ->required();
  auto* train_seed = ctrain->add_option("--seed", seed, "override config seed");
  ctrain->add_option("--out", out, "override checkpoint output path");

  auto* cembed = app.add_subcommand("embed", "embed a message into an image");
  cembed->add_option("--model", model)->required();
  cembed->add_option("--image", image, "cover image (PNG)")->required();
  cembed->add_option("--message", message, "bits or hex")->required();
  auto* embed_s = cembed->add_option("--strength", strength);
  cembed->add_option("--out", out, "watermarked PNG path")->required();

  auto* cextract = app.add_subcommand("extract", "recover a message");
  cextract->add_option("--model", model)->required();
  cextract->add_option("--image", image)->required();

  auto* cattack = app.add_subcommand("attack", "apply one noise to an image");
  cattack->add_option("--image", image)->required();
  cattack->add_option("--noise", noise, "attack name")->required();
  auto* attack_f = cattack->add_option("--factor", factor);
  cattack->add_option("--cover", cover, "splice source for dropout/cropout");
  cattack->add_option("--seed", seed);
  cattack->add_option("--out", out)->required();

  auto* ceval = app.add_subcommand("eval", "per-noise metric table");
  ceval->add_option("--model", model)->required();
  ceval->add_option("--image", image, "dataset directory")->required();
  ceval->add_option("--pool", pool, "noise pool name");
  ceval->add_option("--strength", strengths,
                    "comma list: run a strength sweep instead");
  ceval->add_option("--out", out, "output file prefix");
  ceval->add_option("--seed", seed);

  auto* cinspect = app.add_subcommand("inspect", "print checkpoint metadata");
  cinspect->add_option("--model", model)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ctrain->parsed())
      return run_train(config, seed, !train_seed->empty(), out);
    if (cembed->parsed())
      return run_embed(model, image, message, strength, !embed_s->empty(), out);
    if (cextract->parsed()) return run_extract(model, image);
    if (cattack->parsed())
      return run_attack(image, noise, factor, !attack_f->empty(), cover, seed,
                        out);
    if (ceval->parsed())
      return run_eval(model, image, pool, strengths, out, seed);
    if (cinspect->parsed()) return run_inspect(model);
  } catch (const cin::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const cin::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 4;
  } catch (const cin::TensorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>

#include "cin/checkpoint.hpp"
#include "cin/config.hpp"
#include "cin/dataset.hpp"
#include "cin/metrics.hpp"
#include "cin/parallel.hpp"
#include "cin/trainer_eval.hpp"

namespace cin {

struct StepStats {
  std::int64_t step = 0;
  double total = 0;
  double l_wim = 0, l_rwm = 0, l_rim = 0, l_niam = 0, l_nsm = 0;
  NoiseKind noise = NoiseKind::Identity;
};

struct TrainResult {
  std::vector<StepStats> history;
  std::int64_t steps_run = 0;
  bool early_stopped = false;
  std::string checkpoint_path;
};

// Composed total loss; the restored-image term only participates when its
// weight is non-zero (the noise-free stage).
template <typename T>
Tensor<T> loss_total(const Tensor<T>& cover, const Tensor<T>& wi,
                     const Tensor<T>& msg, const Tensor<T>& rwm_logits,
                     const Tensor<T>* ri, const LossWeights& w) {
  require(w.wim >= 0 && w.rwm >= 0 && w.rim >= 0,
          "loss_total: weights must be non-negative");
  Tensor<T> loss = scale(mse(cover, wi), static_cast<T>(w.wim));
  loss = add(loss, scale(mse(msg, rwm_logits), static_cast<T>(w.rwm)));
  if (w.rim > 0) {
    require(ri != nullptr, "loss_total: restored image required when rim > 0");
    loss = add(loss, scale(mse(cover, *ri), static_cast<T>(w.rim)));
  }
  return loss;
}

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg)
      : cfg_(std::move(cfg)),
        rng_(cfg_.seed),
        model_(make_model(cfg_, rng_)),
        pool_(cfg_.resolve_pool()),
        weights_(stage_weights(cfg_.stage)),
        enc_opt_(static_cast<float>(cfg_.lr)),
        niam_opt_(static_cast<float>(cfg_.lr)),
        nsm_opt_(static_cast<float>(cfg_.lr)) {
    cfg_.validate();
    data_ = Dataset::load(cfg_.data_dir, cfg_.model.image_size);
    enc_opt_.add_params(model_.encoder_params());
    niam_opt_.add_params(model_.niam_params());
    nsm_opt_.add_params(model_.nsm_params());
  }

  CinModel<float>& model() { return model_; }
  const Dataset& dataset() const { return data_; }

  TrainResult run(std::ostream* log = nullptr) {
    TrainResult result;
    std::vector<Index> order(data_.count());
    std::iota(order.begin(), order.end(), 0);
    Index cursor = 0;
    auto reshuffle = [&] {
      for (Index i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng_.integer(i + 1)]);
      cursor = 0;
    };
    reshuffle();

    const float strength = model_.config().strength;
    for (std::int64_t step = 1; step <= cfg_.steps; ++step) {
      // Assemble the batch (wrapping across epochs) and a fresh message.
      std::vector<Index> idx;
      for (int k = 0; k < cfg_.batch; ++k) {
        if (cursor >= static_cast<Index>(order.size())) reshuffle();
        idx.push_back(order[cursor++]);
      }
      TensorF cover = data_.batch(idx);
      TensorF msgs = random_messages(cfg_.batch, cfg_.model.msg_len, rng_);

      StepStats st;
      st.step = step;
      TensorF loss = train_step(cover, msgs, strength, st);
      result.history.push_back(st);
      result.steps_run = step;

      if (log && (step % 50 == 0 || step == 1)) {
        *log << "step " << step << " noise=" << noise_name(st.noise)
             << " loss=" << st.total << " wim=" << st.l_wim
             << " rwm=" << st.l_rwm << " rim=" << st.l_rim
             << " niam=" << st.l_niam << " nsm=" << st.l_nsm << "\n";
      }

      if (cfg_.eval_every > 0 &&
          (step % cfg_.eval_every == 0 || step == cfg_.steps)) {
        if (!cfg_.out.empty()) save(step);
        if (should_stop(step, log)) {
          result.early_stopped = true;
          break;
        }
      }
    }
    if (!cfg_.out.empty()) {
      save(result.steps_run);
      result.checkpoint_path = cfg_.out;
    }
    if (!cfg_.history_csv.empty()) dump_history(result);
    return result;
  }

  // One optimization step over an assembled batch; exposed for tests.
  TensorF train_step(const TensorF& cover, const TensorF& msgs, float strength,
                     StepStats& st) {
    const NoiseSpec spec = pool_.sample(rng_);
    st.noise = spec.kind;

    auto emb = model_.embed(cover, msgs, strength);
    TensorF noised =
        apply_noise(spec, emb.watermarked, cover, rng_,
                    cfg_.model.jpeg_keep_luma, cfg_.model.jpeg_keep_chroma);

    TensorF loss;
    const bool combined = cfg_.stage == "combined";
    const bool encoder_updates = is_differentiable(spec.kind);

    if (!combined || encoder_updates) {
      auto dec = model_.decode_im(noised);
      TensorF l_wim = mse(cover, emb.watermarked);
      TensorF l_rwm = mse(msgs, dec.logits);
      st.l_wim = l_wim[0];
      st.l_rwm = l_rwm[0];
      loss = add(scale(l_wim, static_cast<float>(weights_.wim)),
                 scale(l_rwm, static_cast<float>(weights_.rwm)));
      if (weights_.rim > 0) {
        TensorF l_rim = mse(cover, dec.restored_image);
        st.l_rim = l_rim[0];
        loss = add(loss, scale(l_rim, static_cast<float>(weights_.rim)));
      }
    }

    if (combined) {
      TensorF l_niam = mse(msgs, model_.decode_niam(noised));
      st.l_niam = l_niam[0];
      TensorF niam_term = scale(l_niam, static_cast<float>(kNiamLossWeight));
      loss = loss.defined() ? add(loss, niam_term) : niam_term;

      // The routing classifier observes the noised image without shaping the
      // encoder.
      TensorF label = TensorF::full(
          {cover.dim(0), 1}, is_compression(spec.kind) ? 1.0f : 0.0f);
      TensorF l_nsm = bce_with_logits(
          model_.nsm_logit(stop_gradient(noised)), label);
      st.l_nsm = l_nsm[0];
      loss = add(loss, scale(l_nsm, static_cast<float>(kNsmLossWeight)));
    }

    st.total = loss[0];
    if (!loss.all_finite() || !std::isfinite(st.total)) {
      throw ValueError(
          "training diverged at step " + std::to_string(st.step) + " under " +
          noise_name(spec.kind) + ": wim=" + std::to_string(st.l_wim) +
          " rwm=" + std::to_string(st.l_rwm) + " rim=" + std::to_string(st.l_rim) +
          " niam=" + std::to_string(st.l_niam) + " nsm=" + std::to_string(st.l_nsm));
    }

    backward(loss);
    if (!combined || encoder_updates) enc_opt_.step();
    if (combined) {
      niam_opt_.step();
      nsm_opt_.step();
    }
    enc_opt_.zero_grad();
    niam_opt_.zero_grad();
    nsm_opt_.zero_grad();
    return loss;
  }

  void save(std::int64_t step) const {
    AdamGroups groups = {{"encoder", &enc_opt_},
                         {"niam", &niam_opt_},
                         {"nsm", &nsm_opt_}};
    save_checkpoint(cfg_.out, model_, cfg_.stage, step, groups);
  }

 private:
  static CinModel<float> make_model(TrainConfig& cfg, Rng& rng) {
    if (!cfg.warm_start.empty()) {
      Checkpoint ck = read_checkpoint(cfg.warm_start);
      // The checkpoint owns the architecture; the run config still picks the
      // operating strength.
      const float strength = cfg.model.strength;
      cfg.model = ck.config;
      cfg.model.strength = strength;
      CinModel<float> m = load_model(ck);
      m.config().strength = strength;
      return m;
    }
    return CinModel<float>(cfg.model, rng);
  }

  bool should_stop(std::int64_t step, std::ostream* log) {
    if (cfg_.stage == "noise_free") {
      if (cfg_.target_acc <= 0 && cfg_.target_psnr <= 0) return false;
      auto snap = eval_subset(NoiseKind::Identity);
      if (log)
        *log << "eval step " << step << ": acc=" << snap.acc_im
             << "% psnr=" << snap.psnr1 << " dB\n";
      return snap.acc_im >= cfg_.target_acc && snap.psnr1 >= cfg_.target_psnr;
    }
    if (cfg_.stage == "combined" && cfg_.target_gap > 0) {
      auto snap = eval_subset(NoiseKind::RealJpeg);
      if (log)
        *log << "eval step " << step << ": real_jpeg acc_im=" << snap.acc_im
             << "% acc_niam=" << snap.acc_niam << "%\n";
      return snap.acc_niam >= cfg_.target_acc &&
             snap.acc_niam - snap.acc_im >= cfg_.target_gap;
    }
    return false;
  }

  struct Snapshot {
    double acc_im = 0, acc_niam = 0, psnr1 = 0;
  };

  Snapshot eval_subset(NoiseKind kind) {
    const Index n = std::min<Index>(cfg_.eval_images, data_.count());
    Rng eval_rng(cfg_.seed ^ 0x5eedba11);
    Snapshot s;
    for (Index i = 0; i < n; ++i) {
      TensorF cover = data_.batch({i});
      TensorF msgs = random_messages(1, cfg_.model.msg_len, eval_rng);
      auto emb = model_.embed(cover, msgs, model_.config().strength);
      s.psnr1 += psnr(cover, emb.watermarked);
      TensorF noised = apply_noise(make_spec(kind), emb.watermarked, cover,
                                   eval_rng, cfg_.model.jpeg_keep_luma,
                                   cfg_.model.jpeg_keep_chroma);
      const BitMessage truth = threshold_bits(msgs);
      s.acc_im += acc_percent(threshold_bits(model_.decode_im(noised).logits),
                              truth);
      if (cfg_.stage == "combined")
        s.acc_niam +=
            acc_percent(threshold_bits(model_.decode_niam(noised)), truth);
    }
    s.acc_im /= n;
    s.acc_niam /= n;
    s.psnr1 /= n;
    return s;
  }

  void dump_history(const TrainResult& r) const {
    std::ofstream f(cfg_.history_csv);
    f << "step,noise,total,wim,rwm,rim,niam,nsm\n";
    for (const auto& st : r.history)
      f << st.step << ',' << noise_name(st.noise) << ',' << st.total << ','
        << st.l_wim << ',' << st.l_rwm << ',' << st.l_rim << ',' << st.l_niam
        << ',' << st.l_nsm << '\n';
  }

  TrainConfig cfg_;
  Rng rng_;
  CinModel<float> model_;
  NoisePool pool_;
  LossWeights weights_;
  Adam<float> enc_opt_, niam_opt_, nsm_opt_;
  Dataset data_;
};

}  // namespace cin

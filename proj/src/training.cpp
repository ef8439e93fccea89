#include "steg/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "steg/image.hpp"

namespace steg {

void TrainConfig::validate() const {
    net.validate();
    if (steps < 0) throw InvalidConfig("steps must be non-negative");
    if (batch_size < 1) throw InvalidConfig("batch_size must be at least 1");
    if (lambda_r_target < 0 || lambda_p_target < 0)
        throw InvalidConfig("lambda targets must be non-negative");
    if (lambda_m <= 0) throw InvalidConfig("the message weight must be positive");
    if (ramp_start > ramp_end || ramp_end > steps)
        throw InvalidConfig("need ramp_start <= ramp_end <= steps");
    if (ramp_start < 0) throw InvalidConfig("ramp_start must be non-negative");
    if (checkpoint_interval < 0) throw InvalidConfig("checkpoint_interval must be non-negative");
    CorruptionSpec::by_name(suite);
}

LossWeights lambda_schedule(int step, const TrainConfig& cfg) {
    LossWeights w;
    w.lambda_m = cfg.lambda_m;
    if (step < cfg.ramp_start) {
        w.lambda_r = 0.0;
        w.lambda_p = 0.0;
    } else if (step >= cfg.ramp_end) {
        w.lambda_r = cfg.lambda_r_target;
        w.lambda_p = cfg.lambda_p_target;
    } else {
        const double f = static_cast<double>(step - cfg.ramp_start) /
                         static_cast<double>(cfg.ramp_end - cfg.ramp_start);
        w.lambda_r = f * cfg.lambda_r_target;
        w.lambda_p = f * cfg.lambda_p_target;
    }
    return w;
}

std::string log_to_csv(const std::vector<TrainLogRow>& rows) {
    std::string out = "step,lambda_r,lambda_p,lambda_m,loss_r,loss_p,loss_m,loss_total,bit_acc\n";
    char line[256];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.step,
                      r.lambda_r, r.lambda_p, r.lambda_m, r.loss_r, r.loss_p, r.loss_m,
                      r.loss_total, r.bit_acc);
        out += line;
    }
    return out;
}

void write_log_csv(const std::vector<TrainLogRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoFailure("cannot open log for writing: " + path);
    f << log_to_csv(rows);
    if (!f) throw IoFailure("log write failed: " + path);
}

TrainResult train(const std::vector<Tensor>& images, const TrainConfig& cfg) {
    cfg.validate();
    if (images.empty()) throw EmptyDataset("training needs at least one image");
    const int side = cfg.net.side;
    for (const auto& img : images)
        if (img.ndim() != 4 || img.dim(0) != 1 || img.dim(1) != 3 || img.dim(2) != side ||
            img.dim(3) != side)
            throw ShapeMismatch("training images must be {1,3,H,H} at the configured side");

    const CorruptionSpec suite = CorruptionSpec::by_name(cfg.suite);
    TrainResult result;
    result.params = init_params(cfg.net, cfg.seed);
    result.params.enable_grads();
    Adam opt(result.params.trainable(), cfg.adam);

    const int L = cfg.net.payload_bits;
    Tape tape;
    for (int step = 0; step < cfg.steps; ++step) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step)));
        const LossWeights w = lambda_schedule(step, cfg);

        Tensor batch_loss = Tensor::scalar(0.0);
        TrainLogRow row;
        row.step = step;
        row.lambda_r = w.lambda_r;
        row.lambda_p = w.lambda_p;
        row.lambda_m = w.lambda_m;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& cover = images[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(images.size()) - 1))];
            const Bits sent = random_bits(L, rng);
            Tensor stego = encode(&tape, cover, sent, result.params);
            Tensor received = apply_corruption(&tape, stego, suite, rng);
            Tensor logits = decode_logits(&tape, received, result.params);

            Tensor item = total_loss(&tape, cover, stego, logits, sent, w);
            batch_loss = ops::add(&tape, batch_loss, ops::scale(&tape, item, 1.0 / cfg.batch_size));

            row.loss_r += l2_residual(nullptr, cover, stego).item() / cfg.batch_size;
            row.loss_p += perceptual_proxy(nullptr, cover, stego).item() / cfg.batch_size;
            row.loss_m += message_loss(nullptr, logits, sent).item() / cfg.batch_size;
            row.bit_acc += bit_accuracy(sent, logits_to_bits(logits)) / cfg.batch_size;
        }
        row.loss_total = batch_loss.item();

        if (!std::isfinite(row.loss_total) || row.loss_total > 1e4) {
            tape.clear();
            throw DivergedLoss("loss " + std::to_string(row.loss_total) + " at step " +
                               std::to_string(step));
        }

        opt.zero_grad();
        tape.backward(batch_loss);
        opt.step();
        result.log.push_back(row);

        if (!cfg.checkpoint_path.empty() && cfg.checkpoint_interval > 0 &&
            (step + 1) % cfg.checkpoint_interval == 0)
            save_checkpoint(result.params, cfg.checkpoint_path);
    }

    if (!cfg.checkpoint_path.empty() && cfg.steps > 0)
        save_checkpoint(result.params, cfg.checkpoint_path);
    return result;
}

TrainResult train_from_dir(const std::string& dir, const TrainConfig& cfg) {
    return train(load_dataset(dir, cfg.net.side), cfg);
}

}  // namespace steg

// stegnews: embed, recover and verify news-image payloads
//
// exit codes: 0 success or Match, 2 Mismatch, 3 NoRecord, 4 DecodeFailed,
// 1 operational error

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "steg/error.hpp"
#include "steg/eval.hpp"
#include "steg/image.hpp"
#include "steg/summarize.hpp"
#include "steg/training.hpp"
#include "steg/verify.hpp"

namespace {

using namespace steg;

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot read: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

// plain key=value file; # starts a comment
TrainConfig parse_train_config(const std::string& path) {
    TrainConfig cfg;
    std::ifstream f(path);
    if (!f) throw IoFailure("cannot read config: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string key, value;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char ch : line)
                if (!std::isspace(static_cast<unsigned char>(ch))) blank = false;
            if (blank) continue;
            throw InvalidConfig("config line " + std::to_string(lineno) + ": expected key=value");
        }
        auto strip = [](std::string s) {
            std::size_t b = 0, e = s.size();
            while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
            while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
            return s.substr(b, e - b);
        };
        key = strip(line.substr(0, eq));
        value = strip(line.substr(eq + 1));
        try {
            if (key == "steps") cfg.steps = std::stoi(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "suite") cfg.suite = value;
            else if (key == "side") cfg.net.side = std::stoi(value);
            else if (key == "payload_bits") cfg.net.payload_bits = std::stoi(value);
            else if (key == "alpha") cfg.net.alpha = std::stod(value);
            else if (key == "enc_widths") cfg.net.enc_widths = parse_int_list(value);
            else if (key == "loc_widths") cfg.net.loc_widths = parse_int_list(value);
            else if (key == "dec_widths") cfg.net.dec_widths = parse_int_list(value);
            else if (key == "lambda_r_target") cfg.lambda_r_target = std::stod(value);
            else if (key == "lambda_p_target") cfg.lambda_p_target = std::stod(value);
            else if (key == "lambda_m") cfg.lambda_m = std::stod(value);
            else if (key == "ramp_start") cfg.ramp_start = std::stoi(value);
            else if (key == "ramp_end") cfg.ramp_end = std::stoi(value);
            else if (key == "lr") cfg.adam.lr = std::stod(value);
            else if (key == "beta1") cfg.adam.beta1 = std::stod(value);
            else if (key == "beta2") cfg.adam.beta2 = std::stod(value);
            else if (key == "adam_eps") cfg.adam.eps = std::stod(value);
            else if (key == "checkpoint_interval") cfg.checkpoint_interval = std::stoi(value);
            else throw InvalidConfig("config line " + std::to_string(lineno) + ": unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw InvalidConfig("config line " + std::to_string(lineno) + ": bad value for " + key);
        } catch (const std::out_of_range&) {
            throw InvalidConfig("config line " + std::to_string(lineno) + ": bad value for " + key);
        }
    }
    return cfg;
}

Tensor load_model_image(const std::string& path, int side) {
    Tensor img = load_png(path);
    if (img.dim(2) != side || img.dim(3) != side) img = resize_bilinear(img, side, side);
    return img;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_ckpt) {
    TrainConfig cfg = parse_train_config(config_path);
    cfg.checkpoint_path = out_ckpt;
    const TrainResult result = train_from_dir(data_dir, cfg);
    write_log_csv(result.log, out_ckpt + ".log.csv");
    if (!result.log.empty()) {
        const auto& last = result.log.back();
        std::printf("trained %d steps; final loss %.6f, bit accuracy %.4f\n",
                    cfg.steps, last.loss_total, last.bit_acc);
    }
    std::printf("checkpoint written to %s\n", out_ckpt.c_str());
    return 0;
}

int cmd_encode(const std::string& ckpt, const std::string& image_in,
               const std::string& summary_file, const std::string& registry_path,
               const std::string& image_out, int max_sentences) {
    const StegoParams params = load_checkpoint(ckpt);
    const std::string text = read_text_file(summary_file);
    const std::string summary = summarize_extractive(text, max_sentences);

    Registry reg(registry_path);
    const RegistryEntry entry = reg.put(summary, summary_file);

    const Payload payload =
        text_to_payload(summary, params.cfg.payload_bits, SourceKind::RegistryId);
    const Tensor cover = load_model_image(image_in, params.cfg.side);
    const Tensor stego = encode(nullptr, cover, payload.raw_bits, params);
    save_png(image_out, stego);

    std::printf("registered id %016llx\n", static_cast<unsigned long long>(entry.id));
    std::printf("summary: %s\n", summary.c_str());
    std::printf("stego image written to %s\n", image_out.c_str());
    return 0;
}

int cmd_decode(const std::string& ckpt, const std::string& image_in,
               const std::string& registry_path) {
    const StegoParams params = load_checkpoint(ckpt);
    const Tensor img = load_model_image(image_in, params.cfg.side);
    const Bits bits = logits_to_bits(decode_logits(nullptr, img, params));

    const std::size_t usable = bits.size() / 7 * 7;
    const Bits coded(bits.begin(), bits.begin() + static_cast<std::ptrdiff_t>(usable));
    const double inconsistency = ecc_inconsistency(coded);
    std::printf("raw bits: %zu, block inconsistency: %.3f\n", bits.size(), inconsistency);
    if (inconsistency > 0.25) {
        std::printf("DecodeFailed: payload untrustworthy\n");
        return 4;
    }
    if (bits.size() >= static_cast<std::size_t>(kIdCodedBits)) {
        const std::uint64_t id = payload_to_id(bits);
        std::printf("payload id: %016llx\n", static_cast<unsigned long long>(id));
        if (!registry_path.empty()) {
            Registry reg(registry_path);
            const auto entry = reg.get(id);
            if (!entry) {
                std::printf("NoRecord: id not in registry\n");
                return 3;
            }
            std::printf("summary: %s\n", entry->summary.c_str());
        }
    } else {
        const Payload p{bits, SourceKind::TextDirect, 0};
        std::printf("payload text: %s\n", payload_to_text(p).c_str());
    }
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir,
             const std::vector<std::string>& suite_names, const std::string& out_dir,
             int payloads, std::uint64_t seed, bool vary_resolution) {
    const StegoParams params = load_checkpoint(ckpt);
    const auto images = load_dataset(data_dir, params.cfg.side);
    std::vector<std::pair<std::string, CorruptionSpec>> suites;
    for (const auto& name : suite_names) suites.emplace_back(name, CorruptionSpec::by_name(name));
    const auto reports = evaluate(params, images, suites, payloads, seed, vary_resolution);
    write_report(reports, out_dir);
    std::fputs(format_report(reports).c_str(), stdout);
    std::printf("report written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_verify(const std::string& ckpt, const std::string& image_in,
               const std::string& registry_path, const std::string& claimed_file,
               double threshold, int max_sentences) {
    const StegoParams params = load_checkpoint(ckpt);
    Registry reg(registry_path);
    std::optional<std::string> claimed;
    if (!claimed_file.empty()) claimed = read_text_file(claimed_file);

    const VerifyOptions opts{threshold, max_sentences};
    const Verdict v = verify_file(image_in, claimed, params, reg, opts);
    std::printf("status: %s\n", to_string(v.status).c_str());
    if (v.decoded_id)
        std::printf("payload id: %016llx\n", static_cast<unsigned long long>(*v.decoded_id));
    if (v.decoded_summary) std::printf("summary: %s\n", v.decoded_summary->c_str());
    if (v.similarity) std::printf("similarity: %.4f\n", *v.similarity);

    switch (v.status) {
        case VerifyStatus::Match: return 0;
        case VerifyStatus::Mismatch: return 2;
        case VerifyStatus::NoRecord: return 3;
        case VerifyStatus::DecodeFailed: return 4;
    }
    return 1;
}

int cmd_summarize(const std::string& text_file, int max_sentences) {
    const std::string summary = summarize_extractive(read_text_file(text_file), max_sentences);
    std::printf("%s\n", summary.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"news-image steganography toolkit"};
    app.require_subcommand(1);

    std::string data_dir, config_path, ckpt, image_in, image_out, summary_file, registry_path,
        claimed_file, out_dir, text_file;
    std::vector<std::string> suite_names;
    int max_sentences = 3;
    int payloads = 1;
    std::uint64_t seed = 1;
    double threshold = 0.5;
    bool vary_resolution = false;

    auto* train_cmd = app.add_subcommand("train", "train a model on a directory of PNGs");
    train_cmd->add_option("--data", data_dir, "training image directory")->required();
    train_cmd->add_option("--config", config_path, "key=value training config")->required();
    train_cmd->add_option("--out", ckpt, "output checkpoint path")->required();

    auto* encode_cmd =
        app.add_subcommand("encode", "summarize, register and embed into an image");
    encode_cmd->add_option("--ckpt", ckpt, "model checkpoint")->required();
    encode_cmd->add_option("--image", image_in, "cover image (PNG)")->required();
    encode_cmd->add_option("--summary-file", summary_file, "source text to summarize")->required();
    encode_cmd->add_option("--registry", registry_path, "registry file")->required();
    encode_cmd->add_option("--out", image_out, "output stego image (PNG)")->required();
    encode_cmd->add_option("--max-sentences", max_sentences, "summary length");

    auto* decode_cmd = app.add_subcommand("decode", "recover the payload from an image");
    decode_cmd->add_option("--ckpt", ckpt, "model checkpoint")->required();
    decode_cmd->add_option("--image", image_in, "stego image (PNG)")->required();
    decode_cmd->add_option("--registry", registry_path, "optional registry for id lookup");

    auto* eval_cmd = app.add_subcommand("eval", "bit-accuracy report over corruption suites");
    eval_cmd->add_option("--ckpt", ckpt, "model checkpoint")->required();
    eval_cmd->add_option("--data", data_dir, "evaluation image directory")->required();
    eval_cmd->add_option("--suite", suite_names, "none, digital or print-sim (repeatable)")
        ->check(CLI::IsMember({"none", "digital", "print-sim"}))
        ->required();
    eval_cmd->add_option("--out-dir", out_dir, "report output directory")->required();
    eval_cmd->add_option("--payloads", payloads, "payload draws per image");
    eval_cmd->add_option("--seed", seed, "evaluation seed");
    eval_cmd->add_flag("--vary-resolution", vary_resolution,
                       "round-trip through a random resolution before decoding");

    auto* verify_cmd = app.add_subcommand("verify", "judge an image against the registry");
    verify_cmd->add_option("--ckpt", ckpt, "model checkpoint")->required();
    verify_cmd->add_option("--image", image_in, "quoting image (PNG)")->required();
    verify_cmd->add_option("--registry", registry_path, "registry file")->required();
    verify_cmd->add_option("--claimed-text", claimed_file, "claimed source text file");
    verify_cmd->add_option("--threshold", threshold, "minimum Jaccard similarity for a Match");
    verify_cmd->add_option("--max-sentences", max_sentences, "summary length");

    auto* summarize_cmd = app.add_subcommand("summarize", "extractive summary of a text file");
    summarize_cmd->add_option("--text-file", text_file, "input text")->required();
    summarize_cmd->add_option("--max-sentences", max_sentences, "summary length");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(train_cmd)) return cmd_train(data_dir, config_path, ckpt);
        if (app.got_subcommand(encode_cmd))
            return cmd_encode(ckpt, image_in, summary_file, registry_path, image_out,
                              max_sentences);
        if (app.got_subcommand(decode_cmd)) return cmd_decode(ckpt, image_in, registry_path);
        if (app.got_subcommand(eval_cmd))
            return cmd_eval(ckpt, data_dir, suite_names, out_dir, payloads, seed, vary_resolution);
        if (app.got_subcommand(verify_cmd))
            return cmd_verify(ckpt, image_in, registry_path, claimed_file, threshold,
                              max_sentences);
        if (app.got_subcommand(summarize_cmd)) return cmd_summarize(text_file, max_sentences);
    } catch (const steg::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}

#include "steg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "steg/error.hpp"
#include "steg/image.hpp"

namespace steg {

std::vector<double> percentiles(const std::vector<double>& values,
                                const std::vector<int>& ranks) {
    if (values.empty()) throw EmptyInput("percentiles: no values");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    std::vector<double> out;
    out.reserve(ranks.size());
    for (int r : ranks) {
        if (r < 1 || r > 100) throw InvalidConfig("percentiles: rank outside [1, 100]");
        auto idx = static_cast<std::size_t>(std::ceil(r / 100.0 * n));
        if (idx < 1) idx = 1;
        out.push_back(sorted[idx - 1]);
    }
    return out;
}

namespace {

// fresh error-coded payload padded to the embedding width
Bits draw_payload(int payload_bits, Rng& rng) {
    const int cap = data_bit_capacity(payload_bits);
    Bits data(static_cast<std::size_t>(cap));
    for (auto& b : data) b = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
    Bits coded = ecc_encode(data);
    coded.resize(static_cast<std::size_t>(payload_bits), 0);
    return coded;
}

void finish_aggregates(EvalReport& rep) {
    std::vector<double> accs;
    accs.reserve(rep.records.size());
    double sum = 0.0;
    for (const auto& rec : rep.records) {
        accs.push_back(rec.bit_accuracy);
        sum += rec.bit_accuracy;
    }
    const auto pct = percentiles(accs, {5, 25, 50});
    rep.p5 = pct[0];
    rep.p25 = pct[1];
    rep.p50 = pct[2];
    rep.mean = sum / static_cast<double>(accs.size());
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open for writing: " + path);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw IoFailure("short write: " + path);
}

}  // namespace

std::vector<EvalReport> evaluate(const StegoParams& params, const std::vector<Tensor>& images,
                                 const std::vector<std::pair<std::string, CorruptionSpec>>& suites,
                                 int n_payloads_per_image, std::uint64_t seed,
                                 bool vary_resolution) {
    if (images.empty()) throw EmptyDataset("evaluate: no images");
    if (suites.empty()) throw InvalidConfig("evaluate: no corruption suites");
    if (n_payloads_per_image < 1) throw InvalidConfig("evaluate: need at least one payload per image");
    if (!params.all_finite()) throw NonFiniteOutput("evaluate: parameters are not finite");

    const int side = params.cfg.side;
    const int L = params.cfg.payload_bits;
    for (const auto& img : images)
        if (img.shape() != std::vector<int>{1, 3, side, side})
            throw ShapeMismatch("evaluate: image does not match the model input size");

    std::vector<EvalReport> reports;
    reports.reserve(suites.size());
    for (std::size_t s = 0; s < suites.size(); ++s) {
        const auto& [name, spec] = suites[s];
        spec.validate();
        EvalReport rep;
        rep.suite = name;
        rep.side = side;
        rep.payload_bits = L;
        rep.seed = seed;
        rep.spec_text = spec.serialize();

        const std::uint64_t suite_seed = mix_seed(seed, static_cast<std::uint64_t>(s));
        for (std::size_t i = 0; i < images.size(); ++i) {
            const std::uint64_t image_seed = mix_seed(suite_seed, static_cast<std::uint64_t>(i));
            for (int d = 0; d < n_payloads_per_image; ++d) {
                Rng rng(mix_seed(image_seed, static_cast<std::uint64_t>(d)));
                const Bits sent = draw_payload(L, rng);
                Tensor stego = encode(nullptr, images[i], sent, params);
                Tensor received = apply_corruption(nullptr, stego, spec, rng);
                if (vary_resolution) {
                    const int r = rng.uniform_int(200, 720);
                    received = resize_bilinear(resize_bilinear(received, r, r), side, side);
                }
                const Bits decoded = logits_to_bits(decode_logits(nullptr, received, params));

                EvalRecord rec;
                rec.image_index = static_cast<int>(i);
                rec.payload_index = d;
                rec.bit_accuracy = bit_accuracy(sent, decoded);
                const std::size_t usable = decoded.size() / 7 * 7;
                const Bits coded(decoded.begin(),
                                 decoded.begin() + static_cast<std::ptrdiff_t>(usable));
                rec.corrected_bits = ecc_decode(coded).second;
                rec.ecc_consistent = ecc_inconsistency(coded) <= 0.25;
                rep.records.push_back(rec);
            }
        }
        finish_aggregates(rep);
        reports.push_back(std::move(rep));
    }
    return reports;
}

std::string per_image_csv(const std::vector<EvalReport>& reports) {
    std::string out = "suite,image,payload,bit_accuracy,corrected_bits,ecc_consistent\n";
    char line[256];
    for (const auto& rep : reports)
        for (const auto& rec : rep.records) {
            std::snprintf(line, sizeof(line), "%s,%d,%d,%.6f,%d,%d\n", rep.suite.c_str(),
                          rec.image_index, rec.payload_index, rec.bit_accuracy,
                          rec.corrected_bits, rec.ecc_consistent ? 1 : 0);
            out += line;
        }
    return out;
}

std::string summary_csv(const std::vector<EvalReport>& reports) {
    std::string out = "suite,p5,p25,p50,mean\n";
    char line[256];
    for (const auto& rep : reports) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f\n", rep.suite.c_str(), rep.p5,
                      rep.p25, rep.p50, rep.mean);
        out += line;
    }
    return out;
}

std::string format_report(const std::vector<EvalReport>& reports) {
    std::string out = "suite             p5      p25      p50     mean  images\n";
    char line[256];
    for (const auto& rep : reports) {
        std::snprintf(line, sizeof(line), "%-12s %8.4f %8.4f %8.4f %8.4f  %6zu\n",
                      rep.suite.c_str(), rep.p5, rep.p25, rep.p50, rep.mean, rep.records.size());
        out += line;
    }
    return out;
}

void write_report(const std::vector<EvalReport>& reports, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const std::filesystem::path dir(out_dir);
    write_text((dir / "per_image.csv").string(), per_image_csv(reports));
    write_text((dir / "summary.csv").string(), summary_csv(reports));
    write_text((dir / "report.txt").string(), format_report(reports));
}

}  // namespace steg

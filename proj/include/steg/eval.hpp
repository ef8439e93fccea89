#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "steg/codec.hpp"
#include "steg/corruption.hpp"
#include "steg/stego_net.hpp"

namespace steg {

// nearest-rank percentiles: sort ascending, pick element ceil(rank/100 * n),
// 1-based; one output per requested rank
std::vector<double> percentiles(const std::vector<double>& values, const std::vector<int>& ranks);

struct EvalRecord {
    int image_index = 0;
    int payload_index = 0;
    double bit_accuracy = 0.0;   // sent vs decoded over all raw bits, before error correction
    int corrected_bits = 0;      // blocks repaired by the error-correcting decode
    bool ecc_consistent = true;  // flagged-block fraction within the decode-failure bound
};

struct EvalReport {
    std::string suite;
    std::vector<EvalRecord> records;
    double p5 = 0.0;
    double p25 = 0.0;
    double p50 = 0.0;
    double mean = 0.0;
    // config echo
    int side = 0;
    int payload_bits = 0;
    std::uint64_t seed = 0;
    std::string spec_text;
};

// For every (suite, image, payload draw): embed a fresh error-coded random
// payload, push the result through the suite's corruption channel, decode, and
// record the raw accuracy plus the error-correction outcome.  Deterministic
// for a fixed seed.  vary_resolution additionally round-trips the corrupted
// image through a random side in [200, 720] before decoding.
std::vector<EvalReport> evaluate(const StegoParams& params, const std::vector<Tensor>& images,
                                 const std::vector<std::pair<std::string, CorruptionSpec>>& suites,
                                 int n_payloads_per_image, std::uint64_t seed,
                                 bool vary_resolution = false);

// writes per_image.csv, summary.csv and report.txt under out_dir
void write_report(const std::vector<EvalReport>& reports, const std::string& out_dir);

std::string per_image_csv(const std::vector<EvalReport>& reports);
std::string summary_csv(const std::vector<EvalReport>& reports);
std::string format_report(const std::vector<EvalReport>& reports);  // human-readable table

}  // namespace steg

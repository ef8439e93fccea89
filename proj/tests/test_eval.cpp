#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "steg/eval.hpp"
#include "steg/image.hpp"

using namespace steg;
namespace fs = std::filesystem;

static fs::path tmp_dir() {
    const auto d = fs::temp_directory_path() / "stegnews_eval_test";
    fs::create_directories(d);
    return d;
}

// independent nearest-rank oracle, written straight from the definition
static double percentile_oracle(std::vector<double> v, int rank) {
    std::sort(v.begin(), v.end());
    const double pos = std::ceil(rank / 100.0 * static_cast<double>(v.size()));
    auto idx = static_cast<std::size_t>(pos);
    if (idx < 1) idx = 1;
    return v[idx - 1];
}

static NetConfig tiny_net() {
    NetConfig net;
    net.side = 32;
    net.payload_bits = 16;
    net.enc_widths = {4, 8, 8};
    net.loc_widths = {4, 4, 4};
    net.dec_widths = {4, 8, 8};
    return net;
}

static std::vector<Tensor> tiny_images(int count, int side, std::uint64_t seed) {
    std::vector<Tensor> images;
    for (int i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
        images.push_back(synth_image(side, rng));
    }
    return images;
}

TEST_CASE("percentiles on a uniform grid") {
    std::vector<double> v(100);
    for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = i + 1;
    const auto p = percentiles(v, {5, 25, 50});
    CHECK(p[0] == 5.0);
    CHECK(p[1] == 25.0);
    CHECK(p[2] == 50.0);
    CHECK(percentiles(v, {100})[0] == 100.0);
    CHECK(percentiles(v, {1})[0] == 1.0);
}

TEST_CASE("percentiles of a single element") {
    const auto p = percentiles({0.42}, {5, 25, 50});
    CHECK(p[0] == 0.42);
    CHECK(p[1] == 0.42);
    CHECK(p[2] == 0.42);
}

TEST_CASE("percentiles match the sort-and-index oracle") {
    Rng rng(7);
    std::vector<double> v(37);
    for (auto& x : v) x = rng.uniform(-5.0, 5.0);
    for (int r : {1, 5, 13, 25, 50, 77, 99, 100})
        CHECK(percentiles(v, {r})[0] == percentile_oracle(v, r));

    // random sizes and ranks
    for (int trial = 0; trial < 200; ++trial) {
        const int n = rng.uniform_int(1, 60);
        std::vector<double> w(static_cast<std::size_t>(n));
        for (auto& x : w) x = rng.uniform(0.0, 1.0);
        const int r = rng.uniform_int(1, 100);
        CHECK(percentiles(w, {r})[0] == percentile_oracle(w, r));
    }
}

TEST_CASE("percentiles input validation") {
    CHECK_THROWS_AS(percentiles({}, {5}), EmptyInput);
    CHECK_THROWS_AS(percentiles({1.0}, {0}), InvalidConfig);
    CHECK_THROWS_AS(percentiles({1.0}, {101}), InvalidConfig);
}

TEST_CASE("evaluate records every suite, image and draw") {
    const NetConfig net = tiny_net();
    StegoParams p = init_params(net, 31);
    const auto images = tiny_images(4, net.side, 32);
    const std::vector<std::pair<std::string, CorruptionSpec>> suites = {
        {"none", CorruptionSpec::none()}, {"digital", CorruptionSpec::digital()}};

    const auto reports = evaluate(p, images, suites, 2, 77);
    REQUIRE(reports.size() == 2);
    for (const auto& rep : reports) {
        CHECK(rep.records.size() == 8);
        CHECK(rep.side == net.side);
        CHECK(rep.payload_bits == net.payload_bits);
        CHECK(rep.seed == 77);
        CHECK(rep.p5 <= rep.p25);
        CHECK(rep.p25 <= rep.p50);
        CHECK(rep.p50 <= 1.0);
        for (const auto& rec : rep.records) {
            CHECK(rec.bit_accuracy >= 0.0);
            CHECK(rec.bit_accuracy <= 1.0);
            CHECK(rec.corrected_bits >= 0);
        }
    }
    CHECK(reports[0].spec_text == CorruptionSpec::none().serialize());
    CHECK(reports[1].spec_text == CorruptionSpec::digital().serialize());
}

TEST_CASE("report aggregates are recomputable from the records") {
    const NetConfig net = tiny_net();
    StegoParams p = init_params(net, 33);
    const auto images = tiny_images(5, net.side, 34);
    const auto reports =
        evaluate(p, images, {{"digital", CorruptionSpec::digital()}}, 3, 5);
    REQUIRE(reports.size() == 1);
    std::vector<double> accs;
    double sum = 0.0;
    for (const auto& rec : reports[0].records) {
        accs.push_back(rec.bit_accuracy);
        sum += rec.bit_accuracy;
    }
    const auto pct = percentiles(accs, {5, 25, 50});
    CHECK(reports[0].p5 == pct[0]);
    CHECK(reports[0].p25 == pct[1]);
    CHECK(reports[0].p50 == pct[2]);
    CHECK(reports[0].mean == doctest::Approx(sum / static_cast<double>(accs.size())).epsilon(1e-15));
}

TEST_CASE("evaluate is deterministic and seed-sensitive") {
    const NetConfig net = tiny_net();
    StegoParams p = init_params(net, 35);
    const auto images = tiny_images(3, net.side, 36);
    const std::vector<std::pair<std::string, CorruptionSpec>> suites = {
        {"print-sim", CorruptionSpec::print_sim()}};

    const auto a = evaluate(p, images, suites, 2, 9);
    const auto b = evaluate(p, images, suites, 2, 9);
    CHECK(per_image_csv(a) == per_image_csv(b));
    CHECK(summary_csv(a) == summary_csv(b));

    const auto c = evaluate(p, images, suites, 2, 10);
    CHECK(per_image_csv(a) != per_image_csv(c));
}

TEST_CASE("resolution round trip is wired into the pipeline") {
    const NetConfig net = tiny_net();
    StegoParams p = init_params(net, 37);
    const auto images = tiny_images(2, net.side, 38);
    const std::vector<std::pair<std::string, CorruptionSpec>> suites = {
        {"none", CorruptionSpec::none()}};

    const auto swept = evaluate(p, images, suites, 1, 11, true);
    const auto swept2 = evaluate(p, images, suites, 1, 11, true);
    CHECK(per_image_csv(swept) == per_image_csv(swept2));
    for (const auto& rec : swept[0].records) {
        CHECK(rec.bit_accuracy >= 0.0);
        CHECK(rec.bit_accuracy <= 1.0);
    }
}

TEST_CASE("evaluate input validation") {
    const NetConfig net = tiny_net();
    StegoParams p = init_params(net, 39);
    const auto images = tiny_images(2, net.side, 40);
    const std::vector<std::pair<std::string, CorruptionSpec>> suites = {
        {"none", CorruptionSpec::none()}};

    CHECK_THROWS_AS(evaluate(p, {}, suites, 1, 1), EmptyDataset);
    CHECK_THROWS_AS(evaluate(p, images, {}, 1, 1), InvalidConfig);
    CHECK_THROWS_AS(evaluate(p, images, suites, 0, 1), InvalidConfig);
    CHECK_THROWS_AS(evaluate(p, {Tensor({1, 3, 16, 16})}, suites, 1, 1), ShapeMismatch);

    StegoParams broken = init_params(net, 41);
    broken.at("enc.in.w").data()[0] = std::nan("");
    CHECK_THROWS_AS(evaluate(broken, images, suites, 1, 1), NonFiniteOutput);
}

TEST_CASE("csv emission and reparse") {
    const NetConfig net = tiny_net();
    StegoParams p = init_params(net, 43);
    const auto images = tiny_images(3, net.side, 44);
    const auto reports = evaluate(
        p, images, {{"none", CorruptionSpec::none()}}, 1, 13);

    const std::string per_image = per_image_csv(reports);
    CHECK(per_image.rfind("suite,image,payload,bit_accuracy,corrected_bits,ecc_consistent\n", 0) ==
          0);
    CHECK(std::count(per_image.begin(), per_image.end(), '\n') == 4);

    const std::string summary = summary_csv(reports);
    CHECK(summary.rfind("suite,p5,p25,p50,mean\n", 0) == 0);
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 2);

    char name[64];
    double p5 = -1, p25 = -1, p50 = -1, mean = -1;
    const int got = std::sscanf(summary.c_str() + summary.find('\n') + 1, "%63[^,],%lf,%lf,%lf,%lf",
                                name, &p5, &p25, &p50, &mean);
    REQUIRE(got == 5);
    // columns are %.6f, so reparse matches only to half of the last digit
    CHECK(std::string(name) == "none");
    CHECK(std::fabs(p5 - reports[0].p5) < 5e-7);
    CHECK(std::fabs(p25 - reports[0].p25) < 5e-7);
    CHECK(std::fabs(p50 - reports[0].p50) < 5e-7);
    CHECK(std::fabs(mean - reports[0].mean) < 5e-7);

    CHECK(summary_csv({}) == "suite,p5,p25,p50,mean\n");
    CHECK(per_image_csv({}) ==
          "suite,image,payload,bit_accuracy,corrected_bits,ecc_consistent\n");
}

TEST_CASE("write_report lands all three artifacts") {
    const NetConfig net = tiny_net();
    StegoParams p = init_params(net, 45);
    const auto images = tiny_images(2, net.side, 46);
    const auto reports = evaluate(
        p, images, {{"digital", CorruptionSpec::digital()}}, 1, 15);

    const auto dir = tmp_dir() / "report_out";
    write_report(reports, dir.string());
    for (const char* f : {"per_image.csv", "summary.csv", "report.txt"})
        CHECK(fs::exists(dir / f));

    std::ifstream in(dir / "summary.csv", std::ios::binary);
    std::string on_disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(on_disk == summary_csv(reports));

    const std::string table = format_report(reports);
    CHECK(table.find("digital") != std::string::npos);

    CHECK_THROWS_AS(write_report(reports, "/dev/null/out"), IoFailure);
}

// generates a directory of procedural PNGs for training and evaluation

#include <CLI11.hpp>
#include <cstdio>

#include "steg/error.hpp"
#include "steg/image.hpp"

int main(int argc, char** argv) {
    CLI::App app{"procedural image corpus generator"};
    std::string out_dir;
    int count = 64;
    int side = 64;
    std::uint64_t seed = 1;
    app.add_option("--out", out_dir, "output directory")->required();
    app.add_option("--count", count, "number of images");
    app.add_option("--side", side, "image side length");
    app.add_option("--seed", seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        steg::generate_corpus(out_dir, count, side, seed);
        std::printf("wrote %d %dx%d images to %s\n", count, side, side, out_dir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

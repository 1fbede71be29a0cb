// Writes a procedural three-class texture dataset and a matching stand-in deep feature file.
#include <iostream>

#include <CLI11.hpp>

#include "radfuse/common.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"radfuse-synth: procedural texture dataset generator"};
  std::filesystem::path out;
  std::filesystem::path deep_out;
  radfuse::synth::DatasetOptions opts;
  std::uint64_t deep_seed = 7;
  int jobs = 1;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--per-class", opts.per_class, "Images per class")->check(CLI::PositiveNumber);
  app.add_option("--seed", opts.seed, "Image seed");
  app.add_option("--size", opts.size, "Image side length")->check(CLI::Range(32, 2048));
  app.add_option("--deep-out", deep_out, "Also write a 4096-wide stand-in deep feature file");
  app.add_option("--deep-seed", deep_seed, "Filter bank seed");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto ds = radfuse::synth::write_texture_dataset(out, opts);
    if (!deep_out.empty()) radfuse::synth::write_standin_deep_features(ds, deep_out, deep_seed, jobs);
    std::cerr << "wrote " << ds.size() << " images to " << out.string() << "\n";
  } catch (const radfuse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return radfuse::exit_code_for(e.kind());
  }
  return 0;
}

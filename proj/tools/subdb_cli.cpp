#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "ddm/subdb.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sub-problem solution database maintenance"};
  app.require_subcommand(1);

  std::string build_shape = "2x3", build_out, checkpoint;
  int nmax = 0, threads = 1;
  std::size_t max_entries = 0;

  CLI::App* build = app.add_subcommand("build", "solve every instance and save");
  build->add_option("--shape", build_shape, "2x3 or 3x3");
  build->add_option("--nmax", nmax, "largest robot count stored (0 = all)");
  build->add_option("--out", build_out, "output file")->required();
  build->add_option("--threads", threads, "parallel BFS workers");
  build->add_option("--max-entries", max_entries, "abort past this many entries");
  build->add_option("--checkpoint", checkpoint, "partial store written on abort");

  std::string verify_db;
  int samples = 1000;
  std::uint64_t seed = 0;

  CLI::App* verify = app.add_subcommand("verify", "cross-check against a fresh oracle");
  verify->add_option("--db", verify_db, "database file")->required();
  verify->add_option("--samples", samples, "random instances to check");
  verify->add_option("--seed", seed, "sampling seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) {
      ddm::BuildOptions options;
      options.n_max = nmax;
      options.threads = threads;
      options.max_entries = max_entries;
      options.checkpoint_path = checkpoint;
      ddm::SolutionDatabase db =
          ddm::SolutionDatabase::build(ddm::parse_shape(build_shape), options);
      db.save(build_out);
      std::cout << shape_name(db.shape()) << " database: " << db.size() << " entries -> "
                << build_out << '\n';
    } else {
      ddm::SolutionDatabase db = ddm::SolutionDatabase::load(verify_db);
      ddm::VerifyReport report = ddm::verify_database(db, samples, seed);
      std::cout << "checked " << report.checked << ", mismatches " << report.mismatches
                << '\n';
      if (report.mismatches > 0) return 1;
    }
  } catch (const ddm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

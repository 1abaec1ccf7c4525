#include <cstdio>
#include <exception>

#include "cli_common.hpp"
#include "nsl/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nsl::cli {

void apply_jobs(const RunConfig& cfg) {
#ifdef _OPENMP
  if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);
#else
  (void)cfg;
#endif
}

}  // namespace nsl::cli

int main(int argc, char** argv) {
  CLI::App app{"Structured-light depth decoding lab: synthetic data generation, classical and "
               "learned decoders, and evaluation"};
  app.require_subcommand(1);

  nsl::cli::register_gen_pattern(app);
  nsl::cli::register_gen_data(app);
  nsl::cli::register_train_stage1(app);
  nsl::cli::register_train_stage2(app);
  nsl::cli::register_infer(app);
  nsl::cli::register_baseline_tm(app);
  nsl::cli::register_pseudo_gt(app);
  nsl::cli::register_eval(app);
  nsl::cli::register_report(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const nsl::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const nsl::RuntimeFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}

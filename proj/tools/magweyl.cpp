#include <magweyl/scenario.hpp>

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <iostream>

extern "C" void openblas_set_num_threads(int);

int main(int argc, char** argv) {
  CLI::App app{"magweyl: magnetic pseudodifferential scenarios"};
  std::string path;
  int threads = 0;
  std::string out;
  std::vector<double> window;
  bool verbose = false;
  app.add_option("scenario", path, "scenario file")->required();
  app.add_option("--threads", threads, "worker threads (fallback: MAGWEYL_THREADS, then 1)")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output directory (overrides [output] dir)");
  app.add_option("--window", window, "energy window a,b (overrides the scenario)")->delimiter(',')->expected(2);
  app.add_flag("--verbose", verbose, "progress on stderr");
  CLI11_PARSE(app, argc, argv);

  if (threads == 0) {
    if (const char* env = std::getenv("MAGWEYL_THREADS")) threads = std::atoi(env);
    if (threads <= 0) threads = 1;
  }
  omp_set_num_threads(threads);
  openblas_set_num_threads(1);

  magweyl::run_options opt;
  opt.out_dir = out;
  opt.verbose = verbose;
  if (!window.empty()) opt.window = std::make_pair(window[0], window[1]);

  try {
    const auto s = magweyl::load_scenario(path);
    const auto r = magweyl::run_scenario(s, opt);
    for (const auto& c : r.checks)
      std::cout << (c.informational ? "INFO" : c.pass ? "PASS" : "FAIL") << " " << c.name << ": " << c.measured << "\n";
    if (verbose)
      for (const auto& a : r.artifacts) std::cerr << "wrote " << a << "\n";
    return r.all_pass() ? 0 : 1;
  } catch (const magweyl::parse_error& e) {
    std::cerr << "parse error: " << path << ":" << e.line << ":" << e.column << ": " << e.what() << "\n";
    return 2;
  } catch (const magweyl::precondition_error& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return 3;
  } catch (const magweyl::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const magweyl::evaluation_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return 3;
  }
}

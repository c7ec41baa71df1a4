#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "bookalign/posteriors.hpp"
#include "bookalign/realign.hpp"

// Serves posterior slices from one precomputed CTCP file, matching the
// pipeline's external-provider contract:
//   ctcp_slice --in full.ctcp --start {start_sec} --end {end_sec} --out {out}
int main(int argc, char** argv) {
  CLI::App app{"Cut a time range out of a CTCP posterior file"};
  std::string in_path, out_path;
  double start = 0.0, end = 0.0;
  app.add_option("--in", in_path, "source CTCP file")->required();
  app.add_option("--start", start, "range start in seconds")->required();
  app.add_option("--end", end, "range end in seconds")->required();
  app.add_option("--out", out_path, "destination CTCP file")->required();

  try {
    app.parse(argc, argv);
    const bookalign::MatrixSliceProvider provider(
        bookalign::read_posteriors(in_path));
    bookalign::write_posteriors(provider.posteriors(start, end), out_path);
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

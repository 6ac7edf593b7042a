// Regenerates the committed synthetic fixtures.
//   make_fixtures [output_root]   (default: the source-tree fixtures/ dir)

#include <exception>
#include <iostream>

#include "celltraffic/synth.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path root = argc > 1 ? argv[1] : celltraffic::default_fixture_root();
  try {
    for (const auto& name : celltraffic::fixture_names()) {
      celltraffic::write_fixture(name, root);
      const auto fx = celltraffic::fixture(name, root);
      std::cout << name << ": N=" << fx.series.num_nodes() << " d=" << fx.series.num_features()
                << " T=" << fx.series.length() << " edges=" << fx.graph.num_edges() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

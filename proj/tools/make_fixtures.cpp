// Regenerates the CSV fixtures under data/ from fixed seeds.
#include <iostream>
#include <string>

#include "sqiv/euler.hpp"
#include "sqiv/io.hpp"
#include "sqiv/rng.hpp"
#include "sqiv/simulation.hpp"

namespace {

std::string dgp1_csv(const sqiv::Dataset& d) {
  std::string out = "y,d,z\n";
  for (sqiv::Index i = 0; i < d.n(); ++i)
    out += sqiv::format_full(d.Y()(i, 0)) + "," + sqiv::format_full(d.Y()(i, 1)) + "," +
           sqiv::format_full(d.Z()(i, 1)) + "\n";
  return out;
}

std::string macro_csv(const sqiv::MacroSeries& s) {
  const sqiv::NamedTable t = sqiv::macro_series_to_table(s);
  std::string out;
  for (std::size_t j = 0; j < t.names.size(); ++j) out += (j ? "," : "") + t.names[j];
  out += "\n";
  for (sqiv::Index i = 0; i < t.values.rows(); ++i) {
    for (sqiv::Index j = 0; j < t.values.cols(); ++j)
      out += (j ? "," : "") + sqiv::format_full(t.values(i, j));
    out += "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "data";
  sqiv::write_file_atomic(dir + "/dgp1_n500.csv",
                          dgp1_csv(sqiv::gen_dgp1(500, 20240501, sqiv::stream_id(1, 500, 0))));
  sqiv::write_file_atomic(dir + "/synthetic_macro.csv",
                          macro_csv(sqiv::synthetic_macro_series(2003, 0.99, 5.0, 0.001, 1)));
  std::cout << "fixtures written to " << dir << "\n";
}

#include "pmflow/field_io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "pmflow/determinism.hpp"

namespace pmflow {

using nlohmann::json;

namespace {

json grid_to_json(const GridSpec& g) {
  return json{{"dim", g.dim},
              {"lo", {g.lo[0], g.lo[1]}},
              {"hi", {g.hi[0], g.hi[1]}},
              {"cells", {g.cells[0], g.cells[1]}},
              {"boundary", boundary_mode_name(g.boundary)}};
}

GridSpec grid_from_json(const json& j) {
  GridSpec g;
  g.dim = j.at("dim").get<int>();
  g.lo = {j.at("lo")[0].get<double>(), j.at("lo")[1].get<double>()};
  g.hi = {j.at("hi")[0].get<double>(), j.at("hi")[1].get<double>()};
  g.cells = {j.at("cells")[0].get<int>(), j.at("cells")[1].get<int>()};
  g.boundary = boundary_mode_from_name(j.at("boundary").get<std::string>());
  g.validate();
  return g;
}

}  // namespace

void write_field(const std::filesystem::path& stem, const ScalarField& f) {
  std::filesystem::path bin = stem;
  bin += ".bin";
  std::filesystem::path hdr = stem;
  hdr += ".json";

  {
    std::ofstream os(bin, std::ios::binary);
    if (!os) throw std::runtime_error("write_field: cannot open " + bin.string());
    os.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  }
  json j{{"name", f.name},
         {"time", f.time},
         {"time_hex", double_to_hex(f.time)},
         {"grid", grid_to_json(f.grid)},
         {"count", f.values.size()},
         {"payload", bin.filename().string()},
         {"layout", "float64-le-row-major"}};
  std::ofstream os(hdr);
  if (!os) throw std::runtime_error("write_field: cannot open " + hdr.string());
  os << j.dump(2) << "\n";
}

ScalarField read_field(const std::filesystem::path& stem) {
  std::filesystem::path bin = stem;
  bin += ".bin";
  std::filesystem::path hdr = stem;
  hdr += ".json";

  std::ifstream is(hdr);
  if (!is) throw std::runtime_error("read_field: cannot open " + hdr.string());
  json j = json::parse(is);

  ScalarField f(grid_from_json(j.at("grid")));
  f.name = j.at("name").get<std::string>();
  f.time = j.contains("time_hex") ? hex_to_double(j.at("time_hex").get<std::string>())
                                  : j.at("time").get<double>();
  std::size_t count = j.at("count").get<std::size_t>();
  if (count != f.values.size()) {
    throw std::runtime_error("read_field: cell count mismatch in " + hdr.string());
  }
  std::ifstream bs(bin, std::ios::binary);
  if (!bs) throw std::runtime_error("read_field: cannot open " + bin.string());
  bs.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(bs.gcount()) != count * sizeof(double)) {
    throw std::runtime_error("read_field: short payload in " + bin.string());
  }
  return f;
}

void write_field_csv(const std::filesystem::path& file, const ScalarField& f) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("write_field_csv: cannot open " + file.string());
  const GridSpec& g = f.grid;
  char buf[128];
  os << (g.dim == 2 ? "x,y,value\n" : "x,value\n");
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (g.dim == 2) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", g.center(0, i),
                      g.center(1, j), f.at(i, j));
      } else {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", g.center(0, i), f.at(i, j));
      }
      os << buf;
    }
  }
}

}  // namespace pmflow

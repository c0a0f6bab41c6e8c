#include "chdbc/field_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "chdbc/config.hpp"

namespace chdbc {

namespace {

constexpr const char* kMagic = "# chdbc-field 1";

void write_row(std::ostream& out, const double* v, int n) {
  for (int i = 0; i < n; ++i) {
    if (i) out << ' ';
    out << format_double(v[i]);
  }
  out << '\n';
}

std::string next_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw FieldFormatError(std::string("unexpected end of file before ") + what);
  return line;
}

double to_double(const std::string& tok) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw FieldFormatError("bad number '" + tok + "'");
  }
  return v;
}

void read_values(std::istream& in, std::vector<double>& out, std::size_t count) {
  out.clear();
  out.reserve(count);
  std::string tok;
  while (out.size() < count && in >> tok) out.push_back(to_double(tok));
  if (out.size() != count) throw FieldFormatError("truncated value block");
}

}  // namespace

void write_field(std::ostream& out, const StripMesh& mesh, const CoupledField& field,
                 const std::vector<std::string>& comments) {
  require_sized(mesh, field);
  out << kMagic << '\n';
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "mesh " << mesh.nx() << ' ' << mesh.ny() << ' ' << format_double(mesh.lx()) << ' '
      << format_double(mesh.ly()) << '\n';
  out << "dtype float64\n";
  out << "bulk " << mesh.bulk_size() << '\n';
  for (int j = 0; j < mesh.ny(); ++j) write_row(out, field.bulk.data() + mesh.index(0, j), mesh.nx());
  out << "boundary " << mesh.boundary_size() << '\n';
  write_row(out, field.boundary.data(), mesh.nx());
  write_row(out, field.boundary.data() + mesh.nx(), mesh.nx());
}

void write_field(const std::string& path, const StripMesh& mesh, const CoupledField& field,
                 const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_field(out, mesh, field, comments);
}

FieldFile read_field(std::istream& in) {
  if (next_line(in, "header") != kMagic) throw FieldFormatError("missing field magic line");
  std::vector<std::string> comments;
  std::string line = next_line(in, "mesh line");
  while (line.rfind('#', 0) == 0) {
    comments.push_back(line.size() > 2 ? line.substr(2) : std::string());
    line = next_line(in, "mesh line");
  }

  std::istringstream ms(line);
  std::string tag, lx, ly;
  int nx = 0, ny = 0;
  if (!(ms >> tag >> nx >> ny >> lx >> ly) || tag != "mesh") throw FieldFormatError("bad mesh line");
  StripMesh mesh = [&] {
    try {
      return StripMesh(nx, ny, to_double(lx), to_double(ly));
    } catch (const std::invalid_argument& e) {
      throw FieldFormatError(std::string("bad mesh: ") + e.what());
    }
  }();

  if (next_line(in, "dtype") != "dtype float64") throw FieldFormatError("unsupported dtype");

  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "bulk" || count != mesh.bulk_size()) {
    throw FieldFormatError("bad bulk block header");
  }
  CoupledField f;
  read_values(in, f.bulk, count);
  if (!(in >> tag >> count) || tag != "boundary" || count != mesh.boundary_size()) {
    throw FieldFormatError("bad boundary block header");
  }
  read_values(in, f.boundary, count);
  return FieldFile{std::move(mesh), std::move(f), std::move(comments)};
}

FieldFile read_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FieldFormatError("cannot open '" + path + "'");
  return read_field(in);
}

}  // namespace chdbc

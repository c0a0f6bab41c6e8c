#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "chdbc/geometry.hpp"

namespace chdbc {

class FieldFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text container for a coupled field:
///
///   # chdbc-field 1
///   # <free comment lines, e.g. the resolved configuration>
///   mesh <nx> <ny> <lx> <ly>
///   dtype float64
///   bulk <nx*ny>
///   <ny lines of nx values; line j holds y = j*hy, i = 0..nx-1>
///   boundary <2*nx>
///   <nx values on y = 0>
///   <nx values on y = ly>
///
/// Numbers use the shortest representation that reads back to the same
/// double, so a write/read cycle is bit-exact.
struct FieldFile {
  StripMesh mesh;
  CoupledField field;
  std::vector<std::string> comments;  // without the leading "# "
};

void write_field(std::ostream& out, const StripMesh& mesh, const CoupledField& field,
                 const std::vector<std::string>& comments = {});
void write_field(const std::string& path, const StripMesh& mesh, const CoupledField& field,
                 const std::vector<std::string>& comments = {});

FieldFile read_field(std::istream& in);
FieldFile read_field(const std::string& path);

}  // namespace chdbc

// Writes the built-in theme templates to themes/<name>.json so they ship as
// inspectable data. Run from the repository root:  ./build/dump_themes themes

#include <cstdio>
#include <fstream>

#include "arena/forge.hpp"

int main(int argc, char** argv) {
  std::string dir = argc > 1 ? argv[1] : "themes";
  for (const auto& theme : arena::builtin_themes()) {
    std::string path = dir + "/" + theme.theme + ".json";
    std::ofstream out(path);
    if (!out) {
      std::fprintf(stderr, "cannot open %s for writing\n", path.c_str());
      return 1;
    }
    out << arena::canonical_dump(theme.to_value(), 2) << "\n";
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

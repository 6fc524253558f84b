#include "kondo/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace kondo {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

void save_checkpoint(const std::filesystem::path& path, const std::vector<const Parameter*>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out << "kondo-checkpoint 1\n" << params.size() << '\n';
  for (const Parameter* p : params) {
    out << p->name << ' ' << p->value.rank();
    for (auto e : p->value.shape()) out << ' ' << e;
    out << '\n';
  }
  out << "end\n";
  for (const Parameter* p : params) {
    out.write(reinterpret_cast<const char*>(p->value.data().data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "kondo-checkpoint 1") throw std::runtime_error("not a kondo checkpoint: " + path.string());
  std::getline(in, line);
  if (std::stoull(line) != params.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (const Parameter* p : params) {
    std::getline(in, line);
    std::istringstream ls(line);
    std::string name;
    std::size_t rank = 0;
    ls >> name >> rank;
    Shape shape(rank);
    for (auto& e : shape) ls >> e;
    if (name != p->name || shape != p->value.shape()) {
      throw std::runtime_error("checkpoint entry '" + name + "' " + shape_string(shape) + " does not match '" +
                               p->name + "' " + shape_string(p->value.shape()));
    }
  }
  std::getline(in, line);
  if (line != "end") throw std::runtime_error("checkpoint manifest not terminated");
  for (Parameter* p : params) {
    in.read(reinterpret_cast<char*>(p->value.data().data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint payload truncated at " + p->name);
  }
}

}  // namespace kondo

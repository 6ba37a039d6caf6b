#include "fb/maze_layout.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fb/layout_asset.hpp"

namespace fb {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

MazeLayout MazeLayout::parse(std::string_view text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\r') continue;
    if (c == '\n') {
      lines.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) lines.push_back(std::move(current));
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw std::invalid_argument("maze layout: empty map");

  MazeLayout layout;
  layout.rows_ = static_cast<int>(lines.size());
  layout.cols_ = static_cast<int>(lines.front().size());
  if (layout.cols_ == 0) throw std::invalid_argument("maze layout: empty first row");
  layout.walls_.reserve(static_cast<std::size_t>(layout.rows_ * layout.cols_));
  for (std::size_t r = 0; r < lines.size(); ++r) {
    if (static_cast<int>(lines[r].size()) != layout.cols_) {
      throw std::invalid_argument("maze layout: row " + std::to_string(r) + " has width " +
                                  std::to_string(lines[r].size()) + ", expected " +
                                  std::to_string(layout.cols_));
    }
    for (char c : lines[r]) {
      if (c != '#' && c != '.') {
        throw std::invalid_argument(std::string("maze layout: unexpected character '") + c + "'");
      }
      layout.walls_.push_back(c == '#');
    }
  }
  for (int i = 0; i < layout.num_cells(); ++i) {
    if (!layout.is_wall(i)) layout.open_cells_.push_back(i);
  }
  if (layout.open_cells_.empty()) throw std::invalid_argument("maze layout: no open cell");
  return layout;
}

MazeLayout MazeLayout::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open maze layout " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const MazeLayout& MazeLayout::four_rooms() {
  static const MazeLayout layout = [] {
    MazeLayout l = parse(detail::kFourRoomsLayout);
    if (l.rows() != 11 || l.cols() != 11) {
      throw std::logic_error("shipped four-room layout must be 11x11");
    }
    return l;
  }();
  return layout;
}

std::string MazeLayout::to_text() const {
  std::string out;
  out.reserve(static_cast<std::size_t>(rows_ * (cols_ + 1)));
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) out.push_back(is_wall(r, c) ? '#' : '.');
    out.push_back('\n');
  }
  return out;
}

std::uint64_t MazeLayout::checksum() const { return fnv1a64(to_text()); }

}  // namespace fb

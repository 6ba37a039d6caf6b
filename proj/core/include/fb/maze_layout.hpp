#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fb {

/// Grid of wall (`#`) and open (`.`) cells; cell index = row * cols + col.
class MazeLayout {
 public:
  /// Parses an ASCII map. Every line must have the same width; trailing
  /// newline and '\r' are tolerated. Throws std::invalid_argument otherwise.
  static MazeLayout parse(std::string_view text);
  static MazeLayout load(const std::filesystem::path& path);
  /// The shipped 11x11 four-room map.
  static const MazeLayout& four_rooms();

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] int num_cells() const { return rows_ * cols_; }
  [[nodiscard]] bool is_wall(int cell) const { return walls_[static_cast<std::size_t>(cell)]; }
  [[nodiscard]] bool is_wall(int row, int col) const { return is_wall(row * cols_ + col); }
  [[nodiscard]] int cell(int row, int col) const { return row * cols_ + col; }
  [[nodiscard]] int row_of(int cell) const { return cell / cols_; }
  [[nodiscard]] int col_of(int cell) const { return cell % cols_; }
  [[nodiscard]] const std::vector<int>& open_cells() const { return open_cells_; }

  /// Canonical text ('\n'-terminated rows) and its FNV-1a 64-bit hash.
  [[nodiscard]] std::string to_text() const;
  [[nodiscard]] std::uint64_t checksum() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<bool> walls_;
  std::vector<int> open_cells_;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace fb

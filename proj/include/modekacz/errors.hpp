#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace modekacz {

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed CSV input. Row and column are 1-based positions in the file.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t row, std::size_t column, const std::string& what)
        : std::runtime_error("line " + std::to_string(row) + ", column " + std::to_string(column) + ": " + what),
          row_(row), column_(column) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// A row has fewer unblocked workers left than it needs per query.
class PoolExhausted : public std::runtime_error {
public:
    PoolExhausted(std::size_t row, std::size_t available, std::size_t needed)
        : std::runtime_error("worker pool of row " + std::to_string(row) + " exhausted: " + std::to_string(available) +
                             " unblocked, " + std::to_string(needed) + " needed"),
          row_(row) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

}  // namespace modekacz

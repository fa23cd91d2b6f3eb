#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bnas {

/// Base of every error raised by the library. The category feeds the CLI exit code.
class Error : public std::runtime_error {
 public:
  enum class Category : int { Shape = 2, Input = 3, Format = 4, Io = 5 };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(Category::Shape, "shape error: " + what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(Category::Input, "input error: " + what) {}
};

/// Malformed binary or text payload; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(Category::Format, "format error at offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Category::Io, "io error: " + what) {}
};

}  // namespace bnas

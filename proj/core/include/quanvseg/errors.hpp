#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace quanvseg {

// Base of every error raised by the library. Each subclass maps to one
// failure category so callers (and the CLI exit-code contract) can branch on
// the category without parsing messages.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SizeError : public Error { using Error::Error; };
class IndexError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class StateError : public Error { using Error::Error; };
class LengthError : public Error { using Error::Error; };

// A pixel or feature value outside the angle-encoding domain [0, 1].
class EncodingRangeError : public Error { using Error::Error; };

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class FormatError : public Error {
public:
    FormatError(std::size_t offset, const std::string& what)
        : Error("byte offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Input file missing or unreadable. Kept separate from FormatError because
// the CLI reports it as a usage problem (exit 2).
class FileError : public Error {
public:
    explicit FileError(const std::string& path, const std::string& what = "cannot open file")
        : Error(what + ": " + path), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace quanvseg

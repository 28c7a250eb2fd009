#pragma once

#include <stdexcept>
#include <string>

namespace beaconmap {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Image dimensions are zero or do not agree between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller-supplied value violates an operation's precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A restricted zone is malformed; index() identifies it in the input list.
class ZoneError : public ValidationError {
 public:
  ZoneError(std::size_t index, const std::string& what)
      : ValidationError("zone " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// A template cannot be matched against the image (e.g. it is larger).
class TemplateError : public ValidationError {
 public:
  TemplateError(std::string id, const std::string& what)
      : ValidationError("template " + id + ": " + what), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

// Persisted data failed checksum or schema checks.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace beaconmap

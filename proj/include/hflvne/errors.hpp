#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hflvne {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientCpu : public Error {
 public:
  InsufficientCpu(int node_id, double demand, double available)
      : Error("insufficient cpu on node " + std::to_string(node_id) + ": demand " +
              std::to_string(demand) + " > available " + std::to_string(available)),
        node_id(node_id) {}
  int node_id;
};

class InsufficientBandwidth : public Error {
 public:
  InsufficientBandwidth(int link_id, double demand, double available)
      : Error("insufficient bandwidth on link " + std::to_string(link_id) + ": demand " +
              std::to_string(demand) + " > available " + std::to_string(available)),
        link_id(link_id) {}
  int link_id;
};

class DoubleRelease : public Error {
 public:
  explicit DoubleRelease(int vnr_id)
      : Error("record for vnr " + std::to_string(vnr_id) + " is not active on this substrate"),
        vnr_id(vnr_id) {}
  int vnr_id;
};

class InfeasibleTopology : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyRound : public Error {
 public:
  EmptyRound() : Error("federation round has no uploads") {}
};

class MissingUpload : public Error {
 public:
  explicit MissingUpload(int domain_id)
      : Error("domain " + std::to_string(domain_id) + " has no upload for this round"),
        domain_id(domain_id) {}
  int domain_id;
};

class RejectedRecord : public Error {
 public:
  explicit RejectedRecord(int vnr_id)
      : Error("vnr " + std::to_string(vnr_id) + " was rejected; cost is undefined") {}
};

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

}  // namespace hflvne

#pragma once

#include <stdexcept>
#include <string>

namespace fedtox {

/// Broad failure classes; the CLI maps these onto process exit codes.
enum class ErrorKind {
  Config,    // invalid parameters or configuration
  Data,      // malformed or insufficient input data
  Endpoint,  // remote text-generation endpoint failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define FEDTOX_DEFINE_ERROR(Name, Kind)                  \
  class Name : public Error {                            \
   public:                                               \
    explicit Name(const std::string& what)               \
        : Error(ErrorKind::Kind, #Name ": " + what) {}   \
  };

FEDTOX_DEFINE_ERROR(ConfigError, Config)
FEDTOX_DEFINE_ERROR(ParseError, Data)
FEDTOX_DEFINE_ERROR(ConversationMalformed, Data)
FEDTOX_DEFINE_ERROR(OrphanReply, Data)
FEDTOX_DEFINE_ERROR(DegenerateGraph, Data)
FEDTOX_DEFINE_ERROR(MissingEmbedding, Data)
FEDTOX_DEFINE_ERROR(NoTrainingData, Data)
FEDTOX_DEFINE_ERROR(ShapeError, Data)
FEDTOX_DEFINE_ERROR(EmptyMask, Data)
FEDTOX_DEFINE_ERROR(TrainingDiverged, Data)
FEDTOX_DEFINE_ERROR(ClientIneligible, Data)
FEDTOX_DEFINE_ERROR(InvalidWeight, Data)
FEDTOX_DEFINE_ERROR(NoTestData, Data)
FEDTOX_DEFINE_ERROR(InstanceIneligible, Data)
FEDTOX_DEFINE_ERROR(EmptyConversation, Data)
FEDTOX_DEFINE_ERROR(EndpointUnavailable, Endpoint)

#undef FEDTOX_DEFINE_ERROR

/// Exit code for the CLI: 2 config, 3 data, 4 endpoint.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace fedtox

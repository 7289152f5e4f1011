#pragma once

#include <stdexcept>
#include <string>

namespace pdmpsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error { using Error::Error; };
class ResolutionError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class InvariantError : public Error { using Error::Error; };
class KineticsError : public Error { using Error::Error; };
class NumericalError : public Error { using Error::Error; };
class SchemeError : public Error { using Error::Error; };
class AnalysisError : public Error { using Error::Error; };
class InputError : public Error { using Error::Error; };
class PsdError : public Error { using Error::Error; };
class InternalError : public Error { using Error::Error; };
class OutputError : public Error { using Error::Error; };

}  // namespace pdmpsim

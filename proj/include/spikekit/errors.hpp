#pragma once

#include <stdexcept>
#include <string>

namespace spikekit {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map them to exit codes in one place.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Byte counts or shapes that do not agree.
class SizeError : public Error
{
public:
  using Error::Error;
};

// Index or window outside the valid range.
class RangeError : public Error
{
public:
  using Error::Error;
};

// Argument outside the mathematical domain (negative intensity, gamma <= 0, ...).
class DomainError : public Error
{
public:
  using Error::Error;
};

class IoError : public Error
{
public:
  using Error::Error;
};

class CorruptFileError : public Error
{
public:
  using Error::Error;
};

// Metadata missing a required key.
class SchemaError : public Error
{
public:
  using Error::Error;
};

class ParseError : public Error
{
public:
  using Error::Error;
};

class TimeoutError : public Error
{
public:
  using Error::Error;
};

class ClosedError : public Error
{
public:
  using Error::Error;
};

// Illegal frame-slot state transition.
class StateError : public Error
{
public:
  using Error::Error;
};

} // namespace spikekit

#ifndef INTFORGE_RESULT_HPP
#define INTFORGE_RESULT_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace intforge {

// Minimal ok-or-error carrier for hot-path parsing, where exceptions on
// malformed input would be the common case rather than the exception.
template <typename T, typename E>
class Result {
 public:
  Result(T value) : payload_(std::in_place_index<0>, std::move(value)) {}
  Result(E error) : payload_(std::in_place_index<1>, std::move(error)) {}

  bool ok() const { return payload_.index() == 0; }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::logic_error("Result::value() on error");
    return std::get<0>(payload_);
  }
  T&& value() && {
    if (!ok()) throw std::logic_error("Result::value() on error");
    return std::get<0>(std::move(payload_));
  }
  const E& error() const {
    if (ok()) throw std::logic_error("Result::error() on ok");
    return std::get<1>(payload_);
  }

 private:
  std::variant<T, E> payload_;
};

}  // namespace intforge

#endif  // INTFORGE_RESULT_HPP

#pragma once

#include <cassert>
#include <utility>
#include <variant>

namespace rfidauth {

/// Tagged error wrapper so Result<T, E> stays unambiguous when T == E.
template <class E>
struct Err {
    E value;
};

template <class E>
Err(E) -> Err<E>;

/// Minimal value-or-error holder (C++20 has no std::expected).
template <class T, class E>
class Result {
public:
    Result(T value) : v_(std::in_place_index<0>, std::move(value)) {}  // NOLINT(google-explicit-constructor)
    Result(Err<E> err) : v_(std::in_place_index<1>, std::move(err.value)) {}  // NOLINT(google-explicit-constructor)

    [[nodiscard]] bool has_value() const noexcept { return v_.index() == 0; }
    explicit operator bool() const noexcept { return has_value(); }

    T& value() & {
        assert(has_value());
        return std::get<0>(v_);
    }
    const T& value() const& {
        assert(has_value());
        return std::get<0>(v_);
    }
    T&& value() && {
        assert(has_value());
        return std::get<0>(std::move(v_));
    }
    const T& operator*() const& { return value(); }
    T& operator*() & { return value(); }
    const T* operator->() const { return &value(); }

    [[nodiscard]] const E& error() const {
        assert(!has_value());
        return std::get<1>(v_);
    }

private:
    std::variant<T, E> v_;
};

}  // namespace rfidauth

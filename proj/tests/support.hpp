#ifndef RISKTREE_TESTS_SUPPORT_HPP_
#define RISKTREE_TESTS_SUPPORT_HPP_

#include <doctest.h>

#include <functional>
#include <initializer_list>

#include "risktree/error.hpp"
#include "risktree/tree.hpp"

namespace testing {

inline risktree::Vector vec(std::initializer_list<double> v) {
  risktree::Vector out(static_cast<risktree::Index>(v.size()));
  risktree::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// Code of the risktree::Error thrown by f; fails the test when none is thrown.
inline risktree::Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const risktree::Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return risktree::Errc::ParseError;
}

inline double max_abs(const risktree::Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testing

#endif  // RISKTREE_TESTS_SUPPORT_HPP_

#pragma once

#include <catch2/catch_amalgamated.hpp>
#include <initializer_list>
#include <string>
#include <vector>

#include "ddm/error.hpp"
#include "ddm/grid.hpp"

// Runs f, which must throw ddm::Error, and returns its code.
template <typename F>
ddm::ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const ddm::Error& e) {
    return e.code();
  }
  FAIL("expected a ddm::Error");
  return ddm::ErrorCode::Parse;
}

// Builds a grid from ascii rows; the first string is row j=1. '.'=free, '@'=obstacle.
inline ddm::GridGraph grid_from_rows(std::initializer_list<std::string> rows) {
  int h = static_cast<int>(rows.size());
  int w = static_cast<int>(rows.begin()->size());
  std::vector<ddm::Vertex> obstacles;
  int j = 0;
  for (const std::string& row : rows) {
    ++j;
    REQUIRE(static_cast<int>(row.size()) == w);
    for (int i = 1; i <= w; ++i)
      if (row[i - 1] == '@') obstacles.push_back({i, j});
  }
  return ddm::GridGraph(w, h, obstacles);
}

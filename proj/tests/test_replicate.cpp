#include <gtest/gtest.h>

#include <stdexcept>

#include "rrw/estimators.hpp"
#include "rrw/replicate.hpp"

namespace rrw {
namespace {

TEST(Replicate, ParallelMatchesSerial) {
  WalkConfig base;
  base.b = 3;
  base.scheme = Scheme::once(2.5);
  base.horizon = 500;
  base.seed = 77;
  auto fn = [&](std::size_t r) {
    WalkConfig c = base;
    c.replica = r;
    return run_endpoint(c, 0.3);
  };
  const auto serial = map_replicas_serial(300, fn);
  for (int workers : {1, 2, 3, 8}) {
    const auto par = map_replicas(300, workers, fn);
    ASSERT_EQ(par.size(), serial.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      EXPECT_EQ(par[i].final_height, serial[i].final_height);
      EXPECT_EQ(par[i].max_height, serial[i].max_height);
      EXPECT_EQ(par[i].log_lr, serial[i].log_lr);  // bit-identical
    }
  }
}

TEST(Replicate, EstimatorsIndependentOfWorkerCount) {
  WalkConfig base;
  base.b = 2;
  base.scheme = Scheme::linear(2);
  base.seed = 3;
  const TailEvent ev{TailSide::Upper, 8.0};
  const auto a = estimate_tail(base, ev, 12, 2000, 1, 0.5);
  const auto b = estimate_tail(base, ev, 12, 2000, 4, 0.5);
  EXPECT_EQ(a.p_hat, b.p_hat);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.ess, b.ess);

  base.horizon = 3000;
  const auto s1 = collect_regeneration(base, 6, 1);
  const auto s2 = collect_regeneration(base, 6, 3);
  EXPECT_EQ(s1.pairs, s2.pairs);
  EXPECT_EQ(s1.final_heights, s2.final_heights);
}

TEST(Replicate, ExceptionsPropagate) {
  auto fn = [](std::size_t r) -> int {
    if (r == 57) throw std::runtime_error("replica failed");
    return static_cast<int>(r);
  };
  EXPECT_THROW(map_replicas(100, 4, fn), std::runtime_error);
  EXPECT_THROW(map_replicas_serial(100, fn), std::runtime_error);
}

TEST(Replicate, DefaultWorkersHonoursEnvironment) {
  ::setenv("RRW_WORKERS", "3", 1);
  EXPECT_EQ(default_workers(), 3);
  ::unsetenv("RRW_WORKERS");
  EXPECT_GE(default_workers(), 1);
}

}  // namespace
}  // namespace rrw

#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "pvsmooth.h"

#define CHECK(call)                                                          \
  do {                                                                       \
    PvsStatus s_ = (call);                                                   \
    if (s_ != PVS_STATUS_OK) {                                               \
      const char *m_ = pvs_last_error_message();                             \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, m_ ? m_ : "(none)"); \
      return 1;                                                              \
    }                                                                        \
  } while (0)

int main(void) {
  PvsConfig *cfg = NULL;
  CHECK(pvs_config_from_toml("[constraints]\nfluctuation_limit = 150.0\n", &cfg));

  double pv[] = {4000.0, 4600.0, 4100.0, 3900.0};
  PvsSolution *sol = NULL;
  CHECK(pvs_solve_series(cfg, "D", pv, 4, &sol));

  size_t n = 0;
  double net = 0.0;
  int valid = 0;
  PvsSizing sizing;
  CHECK(pvs_solution_len(sol, &n));
  CHECK(pvs_solution_net_benefit(sol, &net));
  CHECK(pvs_solution_is_valid(sol, &valid));
  CHECK(pvs_solution_sizing(sol, &sizing));

  double grid[4];
  size_t written = 0;
  CHECK(pvs_solution_series(sol, PVS_SERIES_GRID, grid, 4, &written));
  for (size_t k = 1; k < written; k++) {
    if (fabs(grid[k] - grid[k - 1]) > 150.0 + 1e-6) {
      fprintf(stderr, "ramp violated at %zu\n", k);
      return 1;
    }
  }

  PvsConfig *bad = NULL;
  PvsStatus s = pvs_config_from_toml("[constraints]\nfluctuation_limit = -5\n", &bad);
  if (s != PVS_STATUS_CONFIG || pvs_last_error_message() == NULL) {
    fprintf(stderr, "bad config not rejected\n");
    return 1;
  }

  printf("steps=%zu valid=%d net=%.2f battery=%.3f\n", n, valid, net, sizing.battery_power);
  pvs_solution_free(sol);
  pvs_config_free(cfg);
  return valid && n == 4 ? 0 : 1;
}

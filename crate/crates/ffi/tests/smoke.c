#include "fuyau.h"
#include <math.h>
#include <stdio.h>

int main(void) {
    if (fy_abi_version() >> 16 != 1) return 10;
    FyProblem *p = NULL;
    if (fy_problem_new(2, 4, 1, 2.0, 1.0, 1.0e6, NULL, 0, &p) != FY_STATUS_OK) return 11;
    FySolution *s = NULL;
    if (fy_solve(p, &s) != FY_STATUS_OK) return 12;
    size_t len = fy_solution_len(s);
    const double *u = fy_solution_values(s);
    for (size_t i = 0; i < len; i++) {
        if (fabs(u[i] - log(1.0e6)) > 1e-10) return 13;
    }
    fy_solution_free(s);
    fy_problem_free(p);

    FyConfig *cfg = NULL;
    if (fy_config_parse("mode = \"solve\"\n[problem]\nk = 0\n", &cfg) != FY_STATUS_CONFIG_ERROR) return 14;
    char msg[256];
    size_t n = fy_last_error(msg, sizeof msg);
    if (n == 0 || msg[0] == 0) return 15;
    printf("%zu points ok; config error: %s\n", len, msg);
    return 0;
}

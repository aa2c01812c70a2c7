/* Build: cc demo.c -I../include -L../../../target/debug -l:libprefrl_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include <stdlib.h>
#include "prefrl.h"

static const char *CONFIG =
    "{\"schema\": 1,"
    " \"instance\": {\"kind\": \"random\", \"states\": 3, \"actions\": 2, \"horizon\": 3,"
    "                \"dim\": 4, \"policies\": 8, \"param_bound\": 1.0, \"step_norm\": 0.3},"
    " \"algorithm\": \"unknown\", \"delta\": 0.1, \"rounds\": 100, \"seeds\": [1, 2, 3, 4]}";

int main(void) {
    PrefrlExperiment *exp = NULL;
    if (prefrl_experiment_from_json(CONFIG, &exp) != PREFRL_STATUS_OK ||
        prefrl_experiment_run(exp) != PREFRL_STATUS_OK) {
        fprintf(stderr, "error: %s\n", prefrl_last_error());
        prefrl_experiment_free(exp);
        return 1;
    }
    double mean = 0.0, se = 0.0;
    bool passed = false;
    prefrl_experiment_final(exp, PREFRL_REGRET_SCORE, &mean, &se);
    prefrl_experiment_passed(exp, &passed);
    printf("final score regret %.4f +- %.4f, checks %s\n", mean, se, passed ? "passed" : "failed");
    prefrl_experiment_free(exp);
    return passed ? 0 : 1;
}

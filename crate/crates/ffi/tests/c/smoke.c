#include <stdio.h>
#include <string.h>

#include "mechlab.h"

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "check failed at line %d: %s (%s)\n", __LINE__, \
              #cond, ml_last_error_message());                      \
      return 1;                                                      \
    }                                                                \
  } while (0)

int main(void) {
  MlMechanism *mech = NULL;
  CHECK(ml_mechanism_builtin("3x3-E", &mech) == ML_STATUS_OK);

  char *text = NULL;
  CHECK(ml_mechanism_render(mech, &text) == ML_STATUS_OK);
  CHECK(strstr(text, "Decline to State") != NULL);
  ml_string_free(text);

  uintptr_t total = 0, dominant = 0;
  CHECK(ml_count_ex_post_equilibria(mech, &total, &dominant) == ML_STATUS_OK);
  printf("equilibria %lu dominant %lu\n", (unsigned long)total, (unsigned long)dominant);

  uintptr_t msgs[2] = {1, 1};
  uintptr_t outcome = 99;
  CHECK(ml_mechanism_outcome(mech, msgs, 2, &outcome) == ML_STATUS_OK);
  printf("outcome %lu\n", (unsigned long)outcome);
  ml_mechanism_free(mech);

  CHECK(ml_mechanism_builtin("bogus", &mech) == ML_STATUS_DOMAIN);
  CHECK(strlen(ml_last_error_message()) > 0);

  MlEnvironment *env = NULL;
  CHECK(ml_environment_principal_worker(&env) == ML_STATUS_OK);
  bool sp = false;
  uintptr_t principal[4] = {0, 1, 2, 3};
  CHECK(ml_is_strategy_proof(env, principal, 4, &sp) == ML_STATUS_OK);
  printf("strategy-proof %d\n", sp ? 1 : 0);
  ml_environment_free(env);
  return 0;
}

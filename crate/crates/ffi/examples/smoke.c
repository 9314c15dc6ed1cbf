#include <stdio.h>
#include "irvtree.h"

static const char *TABLE =
    "# candidates: A, B, C\n"
    "# bucket_size = 100\n"
    "votes,A,B,C,AB,AC,BA,BC,CA,CB\n"
    "0,0.50,0.10,0.02,0.01,0.50,.,.,0.09,0.17\n"
    "100,0.50,0.30,0.33,0.17,0.40,.,0.10,0.17,0.75\n"
    "200,.,0.30,0.21,0.34,0.07,0.45,0.30,0.37,0.08\n"
    "300,.,0.20,0.20,0.25,0.03,0.31,0.27,0.21,.\n"
    "400,.,0.10,0.15,0.13,.,0.20,0.19,0.10,.\n"
    "500,.,.,0.09,0.10,.,0.04,0.14,0.06,.\n";

int main(void) {
    IrvModel *model = NULL;
    if (irv_model_from_table_str(TABLE, 0, &model) != IRV_STATUS_OK) {
        fprintf(stderr, "load failed: %s\n", irv_last_error());
        return 1;
    }
    double win[3];
    if (irv_model_win_probs(model, win, 3) != IRV_STATUS_OK) {
        fprintf(stderr, "predict failed: %s\n", irv_last_error());
        return 1;
    }
    printf("%.3f %.3f %.3f\n", win[0], win[1], win[2]);

    char *tally = NULL;
    IrvStatus s = irv_tabulate_json("A,10\nB,10\nC,30\n", IRV_TIE_POLICY_ERROR, 0, &tally);
    printf("tie status %d\n", (int)s);

    irv_model_free(model);
    irv_string_free(tally);
    return 0;
}

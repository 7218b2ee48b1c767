#include <math.h>
#include <stdio.h>
#include <string.h>

#include "deeprad.h"

static int fail(const char *what) {
    const char *msg = dr_last_error();
    fprintf(stderr, "%s: %s\n", what, msg ? msg : "(no message)");
    return 1;
}

int main(void) {
    if (dr_feature_count() != 41) return fail("feature count");
    if (strcmp(dr_feature_name(0), "hist_mean") != 0) return fail("first name");

    enum { N = 6 * 6 * 6 };
    float data[N];
    unsigned char bits[N];
    for (int i = 0; i < N; i++) {
        data[i] = 5.0f;
        bits[i] = 1;
    }
    double spacing[3] = {1.0, 1.0, 1.0};
    DrVolume *vol = NULL;
    DrMask *mask = NULL;
    if (dr_volume_new(6, 6, 6, spacing, data, &vol) != DR_STATUS_OK) return fail("volume");
    if (dr_mask_new(6, 6, 6, bits, &mask) != DR_STATUS_OK) return fail("mask");
    double fv[41];
    if (dr_feature_vector(vol, mask, 32, fv) != DR_STATUS_OK) return fail("features");
    if (fv[0] != 5.0 || fv[6] != 1.0) return fail("constant region values");

    double p[3] = {0.01, 0.02, 0.04};
    double adj[3];
    if (dr_holm(p, 3, adj) != DR_STATUS_OK) return fail("holm");
    if (fabs(adj[0] - 0.03) > 1e-15 || adj[1] != 0.04 || adj[2] != 0.04) return fail("holm values");

    double t[3] = {1, 2, 3};
    unsigned char ev[3] = {1, 1, 1};
    DrLogRank lr;
    if (dr_logrank(t, ev, 3, t, ev, 3, &lr) != DR_STATUS_OK) return fail("logrank");
    if (lr.chi2 != 0.0 || lr.p_value != 1.0 || !lr.has_hazard || lr.hazard_ratio != 1.0) return fail("logrank values");

    if (dr_volume_read("/nonexistent/file.nii", &vol) != DR_STATUS_IO) return fail("expected io error");
    if (dr_last_error() == NULL) return fail("missing error message");

    dr_volume_free(vol);
    dr_mask_free(mask);
    printf("ok\n");
    return 0;
}

#include <stdio.h>
#include <string.h>

#include "mbxnet.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            const char *e = mbx_last_error();                         \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__,   \
                    #cond, e ? e : "no error");                       \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    const uint8_t payload[] = {9, 8, 7};
    MbxMailbox *m = NULL, *m2 = NULL, *back = NULL;
    CHECK(mbx_mailbox_new(payload, sizeof payload, 1.0, 0, &m) == MBX_STATUS_OK);
    CHECK(mbx_mailbox_annotate(m, 2, 1, 0.5, 200, true, &m2) == MBX_STATUS_OK);

    double v = 0;
    uint64_t size = 0;
    CHECK(mbx_mailbox_value(m2, &v) == MBX_STATUS_OK && v == 1.5);
    CHECK(mbx_mailbox_size(m2, &size) == MBX_STATUS_OK && size == 24 + 200);

    uint8_t *buf = NULL;
    size_t len = 0;
    CHECK(mbx_mailbox_encode(m2, &buf, &len) == MBX_STATUS_OK && len == 60 + 3 + 25);
    CHECK(mbx_mailbox_decode(buf, len, &back) == MBX_STATUS_OK);
    CHECK(mbx_mailbox_annotation_count(back) == 1);
    CHECK(mbx_mailbox_verify(back) == MBX_STATUS_OK);
    mbx_bytes_free(buf, len);

    const double probs[] = {0.25, 0.25, 0.25, 0.25};
    double e = 0;
    MbxDecision d;
    CHECK(mbx_prediction_entropy(probs, 4, &e) == MBX_STATUS_OK && e == 2.0);
    CHECK(mbx_assess(probs, 4, 2.5, MBX_POLARITY_TRANSMIT_LOW_ENTROPY, &d, &e) == MBX_STATUS_OK);
    CHECK(d == MBX_DECISION_TRANSMIT);

    char *json = NULL;
    CHECK(mbx_run_experiment_json("{\"mode\":\"baseline_all\"}", &json) == MBX_STATUS_CONFIG);
    CHECK(strstr(mbx_last_error(), "seed") != NULL);

    mbx_mailbox_free(back);
    mbx_mailbox_free(m2);
    mbx_mailbox_free(m);
    printf("ok\n");
    return 0;
}

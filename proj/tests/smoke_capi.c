/* The public header must compile as C89-style C and link without C++ symbols. */
#include "gpalign/gpalign.h"

#include <stdio.h>

int main(void)
{
    gpa_point_set* fish = NULL;
    gpa_point_set* members[2] = {NULL, NULL};
    double ncd = -1.0;
    int rc = 1;

    if (gpa_builtin_shape("fish", 0, 0, &fish) != GPA_OK)
        goto done;
    if (gpa_make_group(fish, 2, 0.0, 1, members) != GPA_OK)
        goto done;
    if (gpa_normalized_cd((const gpa_point_set* const*)members, 2, &ncd) != GPA_OK)
        goto done;
    if (ncd != 0.0)
        goto done;
    if (gpa_normalize(NULL, &fish) != GPA_ERR_INVALID_ARGUMENT)
        goto done;
    rc = 0;

done:
    if (rc != 0)
        fprintf(stderr, "smoke_capi failed: %s\n", gpa_last_error());
    gpa_point_set_free(members[0]);
    gpa_point_set_free(members[1]);
    gpa_point_set_free(fish);
    return rc;
}

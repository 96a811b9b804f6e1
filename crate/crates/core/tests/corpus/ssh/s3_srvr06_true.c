extern int nd();

int ssl3_accept(int initial_state) {
    int s__state = initial_state;
    int blastFlag = 0;
    int s__hit = nd();
    int tmp;
    int ret = -1;
    int num1 = 0;
    int s__init_num = 0;
    int s__s3__tmp__next_state___0 = 0;

    while (1) {
        if (s__state == 8464) {
            if (blastFlag == 2) {
                assert(0);
            }
            if (s__hit != 0) {
                s__state = 8496;
            } else {
                s__state = 8480;
            }
        } else if (s__state == 8480) {
            if (blastFlag == 3) {
                blastFlag = 4;
            }
            num1 = num1 + 1;
            s__init_num = s__init_num + num1;
            tmp = nd();
            if (tmp > 0) {
                s__state = 8512;
            } else {
                s__s3__tmp__next_state___0 = 3;
                s__state = s__s3__tmp__next_state___0;
            }
        } else if (s__state == 8496) {
            if (blastFlag == 0) {
                blastFlag = 1;
            }
            tmp = nd();
            if (tmp > 0) {
                s__state = 8464;
            } else {
                s__s3__tmp__next_state___0 = 8528;
                s__state = s__s3__tmp__next_state___0;
            }
        } else if (s__state == 8512) {
            if (blastFlag == 1) {
                blastFlag = 2;
            }
            s__state = 8592;
        } else if (s__state == 8528) {
            if (blastFlag == 1) {
                blastFlag = 2;
            }
            num1 = num1 + 1;
            s__init_num = s__init_num + num1;
            tmp = nd();
            if (tmp > 0) {
                s__state = 3;
            } else {
                s__s3__tmp__next_state___0 = 8592;
                s__state = s__s3__tmp__next_state___0;
            }
        } else if (s__state == 8592) {
            num1 = num1 + 1;
            s__init_num = s__init_num + num1;
            s__state = 3;
        } else if (s__state == 3) {
            ret = 1;
            break;
        } else {
            ret = -1;
            break;
        }
    }
    return ret;
}

int main() {
    int s = 8464;
    int r = ssl3_accept(s);
    return 0;
}

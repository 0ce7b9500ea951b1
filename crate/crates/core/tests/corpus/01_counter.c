#include <stdio.h>

/* Running total shared by the helpers below. */
static int total = 0;

int add(int a, int b)
{
    int sum = a + b;
    total += sum;
    return sum;
}

void print_range(int lo, int hi)
{
    for (int i = lo; i < hi; i++) {
        printf("%d\n", i);
    }
}

int main(void)
{
    int x = add(1, 2);
    if (x > 2) {
        print_range(0, x);
    } else if (x == 2) {
        puts("two");
    } else {
        puts("small");
    }
    return 0;
}

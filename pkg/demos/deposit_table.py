"""Deposit coefficients and tolerated Byzantine counts for a few network sizes.

    python demos/deposit_table.py
"""

from trapsim.game_params import (compute_t0, corollary_deposit_coeff, max_tolerated_byzantine,
                                 worst_case_argmax, worst_case_deposit_coeff)


def main():
    print(f"{'n':>4} {'t0':>3} {'1/t0':>6} {'worst d':>8} {'argmax (k,t)':<16} {'t_max d=1/n':>11} {'t_max d=1/3n':>12}")
    for n in (10, 13, 22, 31, 49, 100):
        wc = worst_case_deposit_coeff(n)
        print(f"{n:>4} {compute_t0(n):>3} {str(corollary_deposit_coeff(n)):>6} {str(wc):>8} "
              f"{str(worst_case_argmax(n)[:2]):<16} {max_tolerated_byzantine(n, f'1/{n}'):>11} "
              f"{max_tolerated_byzantine(n, f'1/{3 * n}'):>12}")


if __name__ == "__main__":
    main()

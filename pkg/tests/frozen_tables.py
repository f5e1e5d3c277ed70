"""Frozen oracle constants shared by module and acceptance tests.

Student-t quantiles tabulated offline by numerically inverting the
regularized incomplete beta CDF; values agree with published t tables.
"""

T_TABLE = {
    (0.9, 1): 3.0776835372078066, (0.95, 1): 6.313751514800932,
    (0.975, 1): 12.706204736432095, (0.995, 1): 63.65674116287399,
    (0.9, 2): 1.8856180831641507, (0.95, 2): 2.919985580355516,
    (0.975, 2): 4.302652729696142, (0.995, 2): 9.92484320091807,
    (0.9, 5): 1.4758840488558216, (0.95, 5): 2.0150483733330233,
    (0.975, 5): 2.570581835636314, (0.995, 5): 4.032142983557536,
    (0.9, 10): 1.3721836411102863, (0.95, 10): 1.8124611228107335,
    (0.975, 10): 2.2281388519649385, (0.995, 10): 3.16927267261695,
    (0.9, 30): 1.310415025391396, (0.95, 30): 1.6972608865939574,
    (0.975, 30): 2.0422724563012373, (0.995, 30): 2.7499956535670305,
    (0.9, 100): 1.2900747613398769, (0.95, 100): 1.66023432606575,
    (0.975, 100): 1.9839715184496334, (0.995, 100): 2.6258905214380177,
}

NORMAL_Q975 = 1.959963984540054

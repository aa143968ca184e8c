"""Extended-precision haversine / initial-bearing oracle.

Writes geo_pairs.csv next to this script: lat1, lon1, lat2, lon2,
distance_m, bearing_deg. Uses mpmath at 60 digits, independent of the f64
implementation. The CSV is frozen; rerun only when adding pairs.
"""
import os

from mpmath import mp, mpf, sin, cos, asin, atan2, sqrt, pi, degrees, radians

mp.dps = 60
R = mpf("6371008.8")

PAIRS = [
    (40.7420, -74.1790, 40.7420, -74.1789),
    (40.7420, -74.1790, 40.7425, -74.1790),
    (40.7420, -74.1790, 40.7415, -74.1783),
    (40.7416, -74.1795, 40.7421, -74.1787),
    (0.0, 0.0, 1.0, 0.0),
    (0.0, 0.0, 0.0, 1.0),
    (51.5074, -0.1278, 48.8566, 2.3522),
    (40.7128, -74.0060, 34.0522, -118.2437),
    (35.6762, 139.6503, -33.8688, 151.2093),
    (-33.9249, 18.4241, -34.6037, -58.3816),
    (64.1466, -21.9426, 55.7558, 37.6173),
    (1.3521, 103.8198, 13.7563, 100.5018),
    (-90.0, 0.0, 89.0, 45.0),
    (10.0, 179.5, 10.5, -179.5),
    (-10.0, -179.9, -10.2, 179.8),
    (45.0, 45.0, 45.0, 45.0001),
    (45.0, 45.0, 45.0001, 45.0),
    (-45.0, -120.0, -44.0, -121.0),
    (60.0, 10.0, 60.0, 20.0),
    (30.0, -90.0, 31.0, -89.0),
    (89.9, 0.0, 89.9, 90.0),
    (-0.5, 0.5, 0.5, -0.5),
    (40.7410, -74.1800, 40.7430, -74.1780),
    (52.2297, 21.0122, 50.0755, 14.4378),
    (19.4326, -99.1332, 4.7110, -74.0721),
]

def hav(lat1, lon1, lat2, lon2):
    p1, p2 = radians(mpf(lat1)), radians(mpf(lat2))
    dp = p2 - p1
    dl = radians(mpf(lon2) - mpf(lon1))
    h = sin(dp / 2) ** 2 + cos(p1) * cos(p2) * sin(dl / 2) ** 2
    d = 2 * R * asin(sqrt(h))
    y = sin(dl) * cos(p2)
    x = cos(p1) * sin(p2) - sin(p1) * cos(p2) * cos(dl)
    b = degrees(atan2(y, x)) % 360
    return d, b

out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "geo_pairs.csv")
with open(out, "w") as f:
    f.write("lat1,lon1,lat2,lon2,distance_m,bearing_deg\n")
    for p in PAIRS:
        d, b = hav(*p)
        f.write("%r,%r,%r,%r,%s,%s\n" % (p[0], p[1], p[2], p[3], mp.nstr(d, 17), mp.nstr(b, 17)))

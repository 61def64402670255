import numpy
import os
from Crypto.Cipher import AES

from bs4 import BeautifulSoup
from dateutil import parser
import skimage.io
